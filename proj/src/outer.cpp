#include "nsdp/outer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nsdp {

std::string_view to_string(HessianMode mode) {
  switch (mode) {
    case HessianMode::exact: return "exact";
    case HessianMode::perturbed: return "perturbed";
    case HessianMode::finite_difference: return "finite_difference";
  }
  return "unknown";
}

std::optional<HessianMode> parse_hessian_mode(std::string_view name) {
  if (name == "exact") return HessianMode::exact;
  if (name == "perturbed") return HessianMode::perturbed;
  if (name == "finite_difference" || name == "fd") return HessianMode::finite_difference;
  return std::nullopt;
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kkt_reached: return "kkt_reached";
    case SolveStatus::max_iters: return "max_iters";
    case SolveStatus::subproblem_failure: return "subproblem_failure";
  }
  return "unknown";
}

std::string_view to_string(RateClass c) {
  switch (c) {
    case RateClass::quadratic: return "quadratic";
    case RateClass::superlinear: return "superlinear";
    case RateClass::linear: return "linear";
    case RateClass::none: return "none";
    case RateClass::insufficient_data: return "insufficient_data";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (!(tol_sigma > 0.0)) throw ContractError("SolverConfig: tol_sigma must be positive");
  if (max_iters < 0) throw ContractError("SolverConfig: max_iters must be nonnegative");
  if (nu && !(*nu > 0.0)) throw ContractError("SolverConfig: nu must be positive");
  if (perturbation.scale < 0.0) throw ContractError("SolverConfig: perturbation scale must be >= 0");
}

RateSummary rate_estimate(std::span<const double> errors, RateWindow window) {
  RateSummary out;
  auto inside = [&](double e) {
    return std::isfinite(e) && e >= window.lo && e <= window.hi * (1.0 + 1e-9);
  };
  for (double e : errors) out.window_size += inside(e) ? 1 : 0;
  for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
    if (!inside(errors[k]) || !inside(errors[k + 1])) continue;
    out.linear_ratios.push_back(errors[k + 1] / errors[k]);
    out.quadratic_ratios.push_back(errors[k + 1] / (errors[k] * errors[k]));
  }
  if (out.quadratic_ratios.empty()) {
    out.quadratic_spread = std::numeric_limits<double>::infinity();
  } else {
    const auto [lo, hi] = std::minmax_element(out.quadratic_ratios.begin(), out.quadratic_ratios.end());
    out.quadratic_spread = *hi / *lo;
  }
  if (out.window_size < 4 || out.linear_ratios.size() < 2) {
    out.classification = RateClass::insufficient_data;
    return out;
  }

  const auto& lin = out.linear_ratios;
  const std::size_t t = lin.size();
  const bool contracting = std::all_of(lin.begin(), lin.end(), [](double r) { return r < 1.0; });
  bool monotone = true;
  for (std::size_t k = 1; k < t; ++k) monotone = monotone && lin[k] < lin[k - 1];
  const bool tail_drop = lin[t - 1] <= lin[t - 2] / 10.0;

  if (contracting && out.quadratic_spread <= 100.0 && tail_drop) {
    out.classification = RateClass::quadratic;
  } else if (contracting && monotone && lin[t - 1] < 1e-2) {
    out.classification = RateClass::superlinear;
  } else if (contracting) {
    out.classification = RateClass::linear;
  } else {
    out.classification = RateClass::none;
  }
  return out;
}

RateSummary rate_from_history(std::span<const IterationRecord> history) {
  const bool have_err = !history.empty() &&
                        std::all_of(history.begin(), history.end(),
                                    [](const IterationRecord& r) { return r.err.has_value(); });
  std::vector<double> seq;
  seq.reserve(history.size());
  for (const auto& r : history) seq.push_back(have_err ? *r.err : r.sigma);
  RateSummary s = rate_estimate(seq);
  s.sigma_proxy = !have_err;
  return s;
}

Mat hessian(const NsdpProblem& prob, const PrimalDualPoint& v, const SolverConfig& cfg,
            std::optional<double> sigma) {
  switch (cfg.hessian_mode) {
    case HessianMode::exact:
      return hess_lagrangian(prob, v);
    case HessianMode::perturbed: {
      const double s = sigma.value_or(kkt_residual(prob, v));
      const double eps = cfg.perturbation.scale * std::pow(s, cfg.perturbation.exponent);
      return hess_lagrangian(prob, v) + eps * Mat::Identity(prob.n(), prob.n());
    }
    case HessianMode::finite_difference: {
      check_point(prob, v);
      const Index n = prob.n();
      Mat h(n, n);
      PrimalDualPoint p = v;
      for (Index j = 0; j < n; ++j) {
        const double step = 1e-6 * (1.0 + std::abs(v.x(j)));
        p.x(j) = v.x(j) + step;
        const Vec gp = grad_lagrangian(prob, p);
        p.x(j) = v.x(j) - step;
        const Vec gm = grad_lagrangian(prob, p);
        p.x(j) = v.x(j);
        h.col(j) = (gp - gm) / (2.0 * step);
      }
      return 0.5 * (h + h.transpose());
    }
  }
  throw ContractError("hessian: unknown mode");
}

namespace {

PartitionSizes spectrum_sizes(const NsdpProblem& prob, const PrimalDualPoint& v) {
  const SymMat m = prob.X(v.x) - v.Z;
  const IndexPartition part = partition(eig(m), default_eig_tol(m));
  return {static_cast<Index>(part.alpha.size()), static_cast<Index>(part.beta.size()),
          static_cast<Index>(part.gamma.size())};
}

}  // namespace

SolveReport run(const NsdpProblem& prob, const PrimalDualPoint& v0, const SolverConfig& cfg,
                const std::optional<PrimalDualPoint>& vstar) {
  cfg.validate();
  check_point(prob, v0);
  if (vstar) check_point(prob, *vstar);

  SolveReport report;
  PrimalDualPoint v = v0;
  double sigma = kkt_residual(prob, v);

  for (int k = 0;; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.sigma = sigma;
    rec.point = v;
    if (vstar) rec.err = distance(v, *vstar);

    if (!std::isfinite(sigma)) {
      report.status = SolveStatus::subproblem_failure;
      report.history.push_back(std::move(rec));
      break;
    }
    rec.sizes = spectrum_sizes(prob, v);
    // sigma == 0 always satisfies the criterion, so no subproblem is ever
    // built with a zero penalty.
    if (sigma <= cfg.tol_sigma) {
      report.status = SolveStatus::kkt_reached;
      report.history.push_back(std::move(rec));
      break;
    }
    if (k >= cfg.max_iters) {
      report.status = SolveStatus::max_iters;
      report.history.push_back(std::move(rec));
      break;
    }

    SubproblemSolution sol;
    try {
      const Mat h = hessian(prob, v, cfg, sigma);
      const StabilizedSubproblem sp = build_subproblem(prob, v, h, sigma, cfg.nu);
      sol = solve_subproblem(sp, cfg.subproblem);
    } catch (const NumericalError&) {
      sol.status = SubproblemStatus::failed;
    }
    if (sol.status == SubproblemStatus::failed) {
      rec.step = std::move(sol);
      report.status = SolveStatus::subproblem_failure;
      report.history.push_back(std::move(rec));
      break;
    }

    rec.norm_delta = sol.w.xi.norm() + (sol.w.zeta - v.y).norm() + (sol.w.Sigma - v.Z).frobenius();
    PrimalDualPoint next{v.x + sol.w.xi, sol.w.zeta, sol.w.Sigma};
    rec.step = std::move(sol);
    report.history.push_back(std::move(rec));

    v = std::move(next);
    try {
      sigma = kkt_residual(prob, v);
    } catch (const NumericalError&) {
      sigma = std::numeric_limits<double>::quiet_NaN();
    }
  }

  report.final_point = v;
  report.rate = rate_from_history(report.history);
  return report;
}

}  // namespace nsdp
