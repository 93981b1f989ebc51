#include "nsdp/subqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nsdp {

void StabilizedSubproblem::validate() const {
  const Index nn = n();
  const Index mm = m();
  const Index dd = d();
  std::ostringstream os;
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    os << "stabilized subproblem requires sigma > 0, got " << sigma;
  } else if (H.rows() != nn || H.cols() != nn) {
    os << "H is " << H.rows() << "x" << H.cols() << ", expected " << nn << "x" << nn;
  } else if (Jg.rows() != nn || Jg.cols() != mm) {
    os << "Jg is " << Jg.rows() << "x" << Jg.cols() << ", expected " << nn << "x" << mm;
  } else if (static_cast<Index>(Aops.size()) != nn) {
    os << "expected " << nn << " operator matrices, got " << Aops.size();
  } else if (yref.size() != mm || Zref.dim() != dd) {
    os << "multiplier dimensions do not match (m, d) = (" << mm << ", " << dd << ")";
  } else if (nu && !(*nu > 0.0)) {
    os << "ball radius must be positive, got " << *nu;
  } else {
    for (const auto& a : Aops) {
      if (a.dim() != dd) {
        os << "operator matrix of dimension " << a.dim() << ", expected " << dd;
        break;
      }
    }
  }
  const std::string msg = os.str();
  if (!msg.empty()) throw ContractError("StabilizedSubproblem: " + msg);
}

StabilizedSubproblem build_subproblem(const NsdpProblem& prob, const PrimalDualPoint& v,
                                      const Mat& H, double sigma, std::optional<double> nu) {
  check_point(prob, v);
  StabilizedSubproblem sp;
  sp.gradf = prob.grad_f(v.x);
  sp.H = 0.5 * (H + H.transpose());
  sp.gval = prob.m() > 0 ? prob.g(v.x) : Vec(0);
  sp.Jg = prob.m() > 0 ? prob.jac_g(v.x) : Mat(prob.n(), 0);
  sp.Xval = prob.X(v.x);
  sp.Aops = prob.A_all(v.x);
  sp.sigma = sigma;
  sp.yref = v.y;
  sp.Zref = v.Z;
  sp.nu = nu;
  sp.validate();
  return sp;
}

Vec eliminate_zeta(const StabilizedSubproblem& sp, const Vec& xi) {
  if (sp.m() == 0) return Vec(0);
  return sp.yref - (sp.gval + sp.Jg.transpose() * xi) / sp.sigma;
}

SymMat dual_matrix_for(const StabilizedSubproblem& sp, const Vec& xi) {
  return proj_psd(sp.Zref - (sp.Xval + combine(sp.Aops, xi)) * (1.0 / sp.sigma));
}

Vec reduced_gradient(const StabilizedSubproblem& sp, const Vec& xi) {
  Vec grad = sp.H * xi + sp.gradf - adjoint(sp.Aops, dual_matrix_for(sp, xi));
  if (sp.m() > 0) grad -= sp.Jg * eliminate_zeta(sp, xi);
  return grad;
}

SubproblemPoint feasible_point(const StabilizedSubproblem& sp) {
  SubproblemPoint w;
  w.xi = Vec::Zero(sp.n());
  w.zeta = eliminate_zeta(sp, w.xi);
  const SymMat slack = proj_psd(sp.Xval - sp.Zref * sp.sigma);
  w.Sigma = sp.Zref - (sp.Xval - slack) * (1.0 / sp.sigma);
  return w;
}

std::string_view to_string(SubproblemStatus s) {
  switch (s) {
    case SubproblemStatus::converged: return "converged";
    case SubproblemStatus::fallback_used: return "fallback_used";
    case SubproblemStatus::failed: return "failed";
  }
  return "unknown";
}

double default_subproblem_tolerance(double sigma) {
  return std::max(1e-12, 1e-4 * sigma * sigma);
}

namespace {

struct Evaluation {
  Vec f1;
  Vec f2;
  SymMat f3;
  SymMat w;  // S - Sigma, where the projection is evaluated

  double sum_norm() const { return f1.norm() + f2.norm() + f3.frobenius(); }
  Vec stacked() const {
    const Vec s3 = svec(f3);
    Vec out(f1.size() + f2.size() + s3.size());
    out << f1, f2, s3;
    return out;
  }
};

Evaluation evaluate(const StabilizedSubproblem& sp, const SubproblemPoint& p) {
  Evaluation ev;
  ev.f1 = sp.H * p.xi + sp.gradf - adjoint(sp.Aops, p.Sigma);
  if (sp.m() > 0) {
    ev.f1 -= sp.Jg * p.zeta;
    ev.f2 = sp.gval + sp.Jg.transpose() * p.xi + sp.sigma * (p.zeta - sp.yref);
  } else {
    ev.f2 = Vec(0);
  }
  const SymMat slack = sp.Xval + combine(sp.Aops, p.xi) + (p.Sigma - sp.Zref) * sp.sigma;
  ev.w = slack - p.Sigma;
  ev.f3 = slack - proj_psd(ev.w);
  return ev;
}

Vec pack(const SubproblemPoint& p) {
  const Vec s = svec(p.Sigma);
  Vec z(p.xi.size() + p.zeta.size() + s.size());
  z << p.xi, p.zeta, s;
  return z;
}

SubproblemPoint unpack(const StabilizedSubproblem& sp, const Vec& z) {
  SubproblemPoint p;
  p.xi = z.head(sp.n());
  p.zeta = z.segment(sp.n(), sp.m());
  p.Sigma = smat(z.tail(svec_size(sp.d())), sp.d());
  return p;
}

Mat newton_jacobian(const StabilizedSubproblem& sp, const SymMat& w) {
  const Index n = sp.n();
  const Index m = sp.m();
  const Index d = sp.d();
  const Index s = svec_size(d);
  // Exact eigenvalue split (tol = 0): this is the true Jacobian of the
  // projection wherever W has no zero eigenvalue.
  const ProjectionDerivative pd(w, 0.0);
  Mat jac = Mat::Zero(n + m + s, n + m + s);
  for (Index j = 0; j < n; ++j) {
    const SymMat& aj = sp.Aops[static_cast<std::size_t>(j)];
    jac.block(0, j, n, 1) = sp.H.col(j);
    if (m > 0) jac.block(n, j, m, 1) = sp.Jg.row(j).transpose();
    jac.block(n + m, j, s, 1) = svec(aj - pd.jacobian_element(aj));
  }
  for (Index i = 0; i < m; ++i) {
    jac.block(0, n + i, n, 1) = -sp.Jg.col(i);
    jac(n + i, n + i) = sp.sigma;
  }
  for (Index k = 0; k < s; ++k) {
    Vec unit = Vec::Zero(s);
    unit(k) = 1.0;
    const SymMat e = smat(unit, d);
    jac.block(0, n + m + k, n, 1) = -adjoint(sp.Aops, e);
    jac.block(n + m, n + m + k, s, 1) =
        svec(e * sp.sigma - pd.jacobian_element(e) * (sp.sigma - 1.0));
  }
  return jac;
}

// Solves J dz = rhs, adding tau I while J is numerically singular.
std::optional<Vec> damped_solve(const Mat& jac, const Vec& rhs, double tau0) {
  Eigen::FullPivLU<Mat> lu(jac);
  if (lu.isInvertible()) {
    Vec dz = lu.solve(rhs);
    if (dz.allFinite()) return dz;
  }
  const Mat eye = Mat::Identity(jac.rows(), jac.cols());
  for (double tau = tau0; tau <= 1e4; tau *= 10.0) {
    lu.compute(jac + tau * eye);
    if (!lu.isInvertible()) continue;
    Vec dz = lu.solve(rhs);
    if (dz.allFinite()) return dz;
  }
  return std::nullopt;
}

struct Candidate {
  SubproblemPoint w;
  double res = std::numeric_limits<double>::infinity();
};

void keep_best(Candidate& best, const SubproblemPoint& w, double res) {
  if (res < best.res) {
    best.w = w;
    best.res = res;
  }
}

StabilizedSubproblem convexified(const StabilizedSubproblem& sp) {
  StabilizedSubproblem out = sp;
  if (sp.n() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Mat> es(sp.H, Eigen::EigenvaluesOnly);
  const double shift = std::max(0.0, 1e-8 - es.eigenvalues()(0));
  out.H += shift * Mat::Identity(sp.n(), sp.n());
  return out;
}

double operator_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()(0);
}

Mat svec_columns(const StabilizedSubproblem& sp) {
  Mat b(svec_size(sp.d()), sp.n());
  for (Index j = 0; j < sp.n(); ++j) b.col(j) = svec(sp.Aops[static_cast<std::size_t>(j)]);
  return b;
}

SubproblemSolution splitting_impl(const StabilizedSubproblem& sp, const SubproblemConfig& cfg,
                                  const SymMat& start, double tol) {
  SubproblemSolution sol;
  sol.tolerance = tol;
  sol.status = SubproblemStatus::failed;
  const Index n = sp.n();

  Mat k = sp.H;
  if (sp.m() > 0) k += sp.Jg * sp.Jg.transpose() / sp.sigma;
  Eigen::LLT<Mat> llt(k);
  if (llt.info() != Eigen::Success) {
    sol.w = feasible_point(sp);
    sol.kkt_res = subproblem_kkt_residual(sp, sol.w);
    return sol;
  }
  Vec base = -sp.gradf;
  if (sp.m() > 0) base += sp.Jg * (sp.yref - sp.gval / sp.sigma);

  auto primal_for = [&](const SymMat& sigma_mat) -> Vec {
    return llt.solve(base + adjoint(sp.Aops, sigma_mat));
  };
  // Dual ascent direction: -(X + A xi) - sigma (Sigma - Z).
  auto dual_gradient = [&](const SymMat& sigma_mat, const Vec& xi) -> SymMat {
    return -(sp.Xval + combine(sp.Aops, xi)) - (sigma_mat - sp.Zref) * sp.sigma;
  };

  const Mat b = svec_columns(sp);
  const Mat g = b * llt.solve(b.transpose());
  double lmax = 0.0;
  if (g.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
    lmax = std::max(0.0, es.eigenvalues()(es.eigenvalues().size() - 1));
  }
  const double lip = lmax + sp.sigma;
  const double mu = sp.sigma;
  const double momentum = (std::sqrt(lip) - std::sqrt(mu)) / (std::sqrt(lip) + std::sqrt(mu));
  (void)n;

  SymMat current = proj_psd(start);
  SymMat extrap = current;
  Candidate best;
  for (int it = 0; it < cfg.max_splitting_iters; ++it) {
    const Vec xi_e = primal_for(extrap);
    const SymMat next = proj_psd(extrap + dual_gradient(extrap, xi_e) * (1.0 / lip));
    extrap = next + (next - current) * momentum;
    current = next;

    SubproblemPoint w;
    w.xi = primal_for(current);
    w.zeta = eliminate_zeta(sp, w.xi);
    w.Sigma = current;
    const double res = subproblem_kkt_residual(sp, w);
    keep_best(best, w, res);
    sol.fallback_iters = it + 1;
    if (res <= tol) {
      sol.status = SubproblemStatus::fallback_used;
      break;
    }
  }
  sol.w = best.w;
  sol.kkt_res = best.res;
  return sol;
}

// Projected gradient on the reduced objective over ||xi|| <= nu.
bool solve_in_ball(const StabilizedSubproblem& sp, const SubproblemConfig& cfg, double tol,
                   SubproblemSolution& sol) {
  const double nu = *sp.nu;
  auto project = [nu](const Vec& xi) -> Vec {
    const double r = xi.norm();
    return r > nu ? Vec(xi * (nu / r)) : xi;
  };
  const double a_norm = operator_norm(svec_columns(sp));
  const double lip = std::max(1e-12, operator_norm(sp.H) +
                                          std::pow(operator_norm(sp.Jg), 2) / sp.sigma +
                                          a_norm * a_norm / sp.sigma);
  Vec xi = project(sol.w.xi);
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_ball_iters; ++it) {
    const Vec next = project(xi - reduced_gradient(sp, xi) / lip);
    res = lip * (next - xi).norm();
    xi = next;
    sol.fallback_iters += 1;
    if (res <= tol) break;
  }
  sol.w.xi = xi;
  sol.w.zeta = eliminate_zeta(sp, xi);
  sol.w.Sigma = dual_matrix_for(sp, xi);
  sol.kkt_res = res;
  sol.ball_active = true;
  return res <= tol;
}

}  // namespace

SubproblemResiduals subproblem_residuals(const StabilizedSubproblem& sp, const SubproblemPoint& w) {
  if (w.xi.size() != sp.n() || w.zeta.size() != sp.m() || w.Sigma.dim() != sp.d()) {
    throw ContractError("subproblem_kkt_residual: point dimensions do not match subproblem");
  }
  const Evaluation ev = evaluate(sp, w);
  return {ev.f1.norm(), ev.f2.norm(), ev.f3.frobenius()};
}

double subproblem_kkt_residual(const StabilizedSubproblem& sp, const SubproblemPoint& w) {
  return subproblem_residuals(sp, w).total();
}

SubproblemSolution solve_subproblem_splitting(const StabilizedSubproblem& sp,
                                              const SubproblemConfig& cfg,
                                              std::optional<SymMat> start) {
  sp.validate();
  const StabilizedSubproblem work = cfg.convexify ? convexified(sp) : sp;
  const double tol = cfg.tolerance.value_or(default_subproblem_tolerance(sp.sigma));
  return splitting_impl(work, cfg, start.value_or(work.Zref), tol);
}

SubproblemSolution solve_subproblem(const StabilizedSubproblem& sp, const SubproblemConfig& cfg) {
  sp.validate();
  const StabilizedSubproblem work = cfg.convexify ? convexified(sp) : sp;
  const double tol = cfg.tolerance.value_or(default_subproblem_tolerance(sp.sigma));

  SubproblemSolution sol;
  sol.tolerance = tol;

  SubproblemPoint w{Vec::Zero(work.n()), work.yref, work.Zref};
  Vec z = pack(w);
  Evaluation ev = evaluate(work, w);
  Candidate best;
  keep_best(best, w, ev.sum_norm());

  bool converged = ev.sum_norm() <= tol;
  int since_best = 0;
  while (!converged && sol.newton_iters < cfg.max_newton_iters) {
    std::optional<Vec> dz;
    try {
      dz = damped_solve(newton_jacobian(work, ev.w), -ev.stacked(), cfg.initial_damping);
    } catch (const NumericalError&) {
      dz.reset();
    }
    if (!dz) break;

    const double theta0 = ev.stacked().squaredNorm();
    bool accepted = false;
    for (double t = 1.0; t >= 1e-12; t *= cfg.backtrack) {
      const Vec zt = z + t * *dz;
      try {
        const SubproblemPoint wt = unpack(work, zt);
        Evaluation evt = evaluate(work, wt);
        if (evt.stacked().squaredNorm() <= (1.0 - 2.0 * cfg.armijo_slope * t) * theta0) {
          z = zt;
          w = wt;
          ev = std::move(evt);
          accepted = true;
          break;
        }
      } catch (const NumericalError&) {
        // Non-finite trial point; shorten the step.
      }
    }
    if (!accepted) break;
    ++sol.newton_iters;

    const double res = ev.sum_norm();
    if (res < best.res) {
      since_best = 0;
    } else if (++since_best >= cfg.stall_window) {
      keep_best(best, w, res);
      break;
    }
    keep_best(best, w, res);
    converged = res <= tol;
  }

  if (converged) {
    sol.w = w;
    sol.kkt_res = ev.sum_norm();
    sol.status = SubproblemStatus::converged;
  } else {
    SubproblemSolution fb;
    try {
      fb = splitting_impl(work, cfg, best.w.Sigma, tol);
    } catch (const NumericalError&) {
      fb.status = SubproblemStatus::failed;
    }
    sol.fallback_iters = fb.fallback_iters;
    if (fb.status == SubproblemStatus::fallback_used) {
      sol.w = fb.w;
      sol.kkt_res = fb.kkt_res;
      sol.status = SubproblemStatus::fallback_used;
    } else {
      const bool fb_better = fb.w.xi.size() == work.n() && fb.kkt_res < best.res;
      sol.w = fb_better ? fb.w : best.w;
      sol.kkt_res = fb_better ? fb.kkt_res : best.res;
      sol.status = SubproblemStatus::failed;
    }
  }

  if (sol.status != SubproblemStatus::failed && work.nu && sol.w.xi.norm() > *work.nu) {
    if (!solve_in_ball(work, cfg, tol, sol)) sol.status = SubproblemStatus::failed;
  }
  return sol;
}

}  // namespace nsdp
