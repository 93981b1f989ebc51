#pragma once

// Stabilized quadratic SDP subproblem at an iterate v = (x, y, Z):
//
//   minimize    <grad f, xi> + 1/2 <H xi, xi> + sigma/2 ||zeta||^2 + sigma/2 ||Sigma||_F^2
//   subject to  g + Jg^T xi + sigma (zeta - y) = 0
//               X + A xi + sigma (Sigma - Z)  PSD
//
// optionally with the ball ||xi|| <= nu. Solved for a KKT point by
// semismooth Newton on
//
//   F1 = H xi + grad f - Jg zeta - A^* Sigma
//   F2 = g + Jg^T xi + sigma (zeta - y)
//   F3 = S - P(S - Sigma),   S = X + A xi + sigma (Sigma - Z),
//
// with a dual projected-gradient splitting method as fallback.

#include "nsdp/model.hpp"

#include <optional>
#include <string_view>

namespace nsdp {

/// Frozen problem data at one iterate. Owns copies of everything it needs.
struct StabilizedSubproblem {
  Vec gradf;
  Mat H;
  Vec gval;
  Mat Jg;  // n x m
  SymMat Xval;
  std::vector<SymMat> Aops;
  double sigma = 0.0;
  Vec yref;
  SymMat Zref;
  std::optional<double> nu;

  Index n() const { return gradf.size(); }
  Index m() const { return gval.size(); }
  Index d() const { return Xval.dim(); }

  /// Throws ContractError on inconsistent dimensions or sigma <= 0.
  void validate() const;
};

StabilizedSubproblem build_subproblem(const NsdpProblem& prob, const PrimalDualPoint& v,
                                      const Mat& H, double sigma,
                                      std::optional<double> nu = std::nullopt);

/// A candidate (xi, zeta, Sigma).
struct SubproblemPoint {
  Vec xi;
  Vec zeta;
  SymMat Sigma;
};

struct SubproblemResiduals {
  double stationarity = 0.0;
  double equality = 0.0;
  double complementarity = 0.0;
  double total() const { return stationarity + equality + complementarity; }
};

SubproblemResiduals subproblem_residuals(const StabilizedSubproblem& sp, const SubproblemPoint& w);

/// Sum of the three KKT residual norms; zero exactly at subproblem KKT points.
double subproblem_kkt_residual(const StabilizedSubproblem& sp, const SubproblemPoint& w);

/// zeta solving the equality constraint for a given xi: y - (g + Jg^T xi) / sigma.
Vec eliminate_zeta(const StabilizedSubproblem& sp, const Vec& xi);

/// Maximizer of the inner problem over Sigma for a given xi:
/// P(Z - (X + A xi) / sigma). Together with eliminate_zeta this makes
/// (xi, zeta, Sigma) satisfy F2 = 0 and F3 = 0.
SymMat dual_matrix_for(const StabilizedSubproblem& sp, const Vec& xi);

/// The point (0, y - g / sigma, Z - (X - P(X - sigma Z)) / sigma). It
/// satisfies both constraints exactly for every subproblem, so the
/// stabilized subproblem is never infeasible.
SubproblemPoint feasible_point(const StabilizedSubproblem& sp);

enum class SubproblemStatus { converged, fallback_used, failed };

std::string_view to_string(SubproblemStatus s);

struct SubproblemSolution {
  SubproblemPoint w;
  double kkt_res = 0.0;
  double tolerance = 0.0;
  int newton_iters = 0;
  int fallback_iters = 0;
  SubproblemStatus status = SubproblemStatus::failed;
  /// The nu-ball was active and the returned point solves the ball-constrained problem.
  bool ball_active = false;
};

struct SubproblemConfig {
  /// Absent: max(1e-12, 1e-4 sigma^2).
  std::optional<double> tolerance;
  int max_newton_iters = 100;
  /// Newton hands over to the splitting method after this many steps
  /// without a new best residual.
  int stall_window = 10;
  double armijo_slope = 1e-4;
  double backtrack = 0.5;
  double initial_damping = 1e-8;
  int max_splitting_iters = 200000;
  int max_ball_iters = 200000;
  /// Replace H by H + max(0, 1e-8 - lambda_min(H)) I before solving.
  bool convexify = false;
};

double default_subproblem_tolerance(double sigma);

/// Semismooth Newton from (0, y, Z), falling back to splitting on stall.
/// Never throws for numerical trouble; failure is reported in the status.
SubproblemSolution solve_subproblem(const StabilizedSubproblem& sp,
                                    const SubproblemConfig& cfg = {});

/// Accelerated projected gradient on the concave dual in Sigma: each step
/// solves the linear system in (xi, zeta) for fixed Sigma, then updates
/// Sigma with one PSD projection. Requires H + Jg Jg^T / sigma positive
/// definite; reports failed otherwise.
SubproblemSolution solve_subproblem_splitting(const StabilizedSubproblem& sp,
                                              const SubproblemConfig& cfg = {},
                                              std::optional<SymMat> start = std::nullopt);

/// Gradient of the reduced objective obtained by maximizing out zeta and
/// Sigma: H xi + grad f - Jg zeta(xi) - A^* Sigma(xi).
Vec reduced_gradient(const StabilizedSubproblem& sp, const Vec& xi);

}  // namespace nsdp
