#pragma once

// Locally convergent stabilized SQSDP outer loop with convergence-rate
// instrumentation.

#include "nsdp/subqp.hpp"

#include <cstdint>
#include <span>

namespace nsdp {

enum class HessianMode { exact, perturbed, finite_difference };

std::string_view to_string(HessianMode mode);
std::optional<HessianMode> parse_hessian_mode(std::string_view name);

/// eps_k = scale * sigma_k^exponent, added to the exact Hessian in
/// perturbed mode.
struct PerturbationSchedule {
  double scale = 1.0;
  double exponent = 0.5;
};

struct SolverConfig {
  double tol_sigma = 1e-10;
  int max_iters = 50;
  HessianMode hessian_mode = HessianMode::exact;
  PerturbationSchedule perturbation;
  std::optional<double> nu;
  SubproblemConfig subproblem;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PartitionSizes {
  Index alpha = 0;
  Index beta = 0;
  Index gamma = 0;
};

struct IterationRecord {
  int k = 0;
  double sigma = 0.0;
  /// ||v_k - v*|| when a reference point was supplied.
  std::optional<double> err;
  PrimalDualPoint point;
  /// Spectrum split of X(x_k) - Z_k.
  PartitionSizes sizes;
  /// Present when a step was taken from this iterate.
  std::optional<SubproblemSolution> step;
  /// ||(xi, zeta - y_k, Sigma - Z_k)||.
  std::optional<double> norm_delta;
};

enum class SolveStatus { kkt_reached, max_iters, subproblem_failure };

std::string_view to_string(SolveStatus s);

enum class RateClass { quadratic, superlinear, linear, none, insufficient_data };

std::string_view to_string(RateClass c);

struct RateSummary {
  RateClass classification = RateClass::insufficient_data;
  /// e_{k+1} / e_k over consecutive pairs inside the window.
  std::vector<double> linear_ratios;
  /// e_{k+1} / e_k^2 over the same pairs.
  std::vector<double> quadratic_ratios;
  /// max / min of quadratic_ratios (infinity when empty).
  double quadratic_spread = 0.0;
  /// Number of errors that fell inside the window.
  int window_size = 0;
  /// Ratios were computed from sigma_k because no reference point was known.
  bool sigma_proxy = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::max_iters;
  PrimalDualPoint final_point;
  std::vector<IterationRecord> history;
  RateSummary rate;
};

/// Window of errors used for rate classification.
struct RateWindow {
  double lo = 1e-11;
  double hi = 1e-1;
};

/// Classifies a convergence sequence. Needs at least four errors inside the
/// window; quadratic when the quadratic ratios stay within a factor 100 of
/// each other and the last linear ratio is at least 10x below the previous
/// one; superlinear when the linear ratios decrease monotonically and end
/// below 1e-2; linear when they all stay below one.
RateSummary rate_estimate(std::span<const double> errors, RateWindow window = {});

/// Rate summary of a history: uses err_k when every record has one and
/// falls back to sigma_k otherwise.
RateSummary rate_from_history(std::span<const IterationRecord> history);

/// H(v) according to the configured mode. sigma is sigma(v); it is only
/// read in perturbed mode and computed on demand when absent.
Mat hessian(const NsdpProblem& prob, const PrimalDualPoint& v, const SolverConfig& cfg,
            std::optional<double> sigma = std::nullopt);

/// Runs the method from v0. When vstar is given, each record carries
/// ||v_k - v*||.
SolveReport run(const NsdpProblem& prob, const PrimalDualPoint& v0, const SolverConfig& cfg,
                const std::optional<PrimalDualPoint>& vstar = std::nullopt);

}  // namespace nsdp
