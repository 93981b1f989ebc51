#pragma once

// Numerical probes at computed or stored solutions: two-sided error-bound
// ratios, complementarity spectrum, sampled second-order curvature on the
// critical cone, and perturbed-KKT closure of subproblem solutions.
//
// None of these certify a hypothesis; they produce evidence.

#include "nsdp/outer.hpp"

#include <random>
#include <string>

namespace nsdp {

struct RadiusStats {
  double radius = 0.0;
  int samples = 0;
  double min_sigma_over_dist = 0.0;
  double max_sigma_over_dist = 0.0;
  double min_dist_over_sigma = 0.0;
  double max_dist_over_sigma = 0.0;
};

struct SpectrumReport {
  IndexPartition partition;
  /// beta is empty.
  bool strict = false;
};

struct SoscReport {
  /// Minimum of <(hess L + H) d, d> over accepted unit directions; empty
  /// when no direction passed the critical-cone thresholds.
  std::optional<double> min_curvature;
  int accepted = 0;
  int sampled = 0;
};

struct ProbeReport {
  std::string problem_id;
  PrimalDualPoint vstar;
  std::vector<RadiusStats> radii;
  std::optional<SpectrumReport> spectrum;
  std::optional<SoscReport> sosc;
  std::vector<std::string> notes;
};

/// A direction of sum-norm exactly r: a standard Gaussian in the
/// coordinates (x, y, svec Z), rescaled.
PrimalDualPoint random_perturbation(Index n, Index m, Index d, double r, std::mt19937_64& rng);

/// For each radius draws `samples` points at sum-norm distance exactly r
/// from vstar and records the extremes of sigma(v)/||v - v*|| and its
/// inverse. Throws ContractError when sigma(vstar) > 1e-10.
std::vector<RadiusStats> error_bound_probe(const NsdpProblem& prob, const PrimalDualPoint& vstar,
                                           std::span<const double> radii, int samples,
                                           std::uint64_t seed);

/// alpha/beta/gamma split of X(x) - Z at the default tolerance.
SpectrumReport complementarity_spectrum(const NsdpProblem& prob, const PrimalDualPoint& v);

/// Samples unit directions, pulls them toward the critical cone by
/// alternating projections (50 rounds) and returns the smallest curvature
/// among directions with |grad f^T d|, ||Jg^T d|| and the tangent-cone
/// residual of A d all <= 1e-8.
SoscReport sosc_probe(const NsdpProblem& prob, const PrimalDualPoint& vstar, int num_dirs,
                      std::uint64_t seed);

/// The perturbation (r, s, T) = (H xi, Jg^T xi + sigma (zeta - y),
/// A xi + sigma (Sigma - Z)) under which (x, zeta, Sigma) is a KKT point of
/// the perturbed problem exactly when w solves the subproblem.
KktPerturbation subproblem_perturbation(const StabilizedSubproblem& sp, const SubproblemPoint& w);

/// perturbed_kkt_residual at (x, zeta, Sigma) with subproblem_perturbation.
double perturbed_kkt_closure(const NsdpProblem& prob, const PrimalDualPoint& v,
                             const StabilizedSubproblem& sp, const SubproblemPoint& w);

}  // namespace nsdp
