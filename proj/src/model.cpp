#include "nsdp/model.hpp"

#include <sstream>

namespace nsdp {

namespace {

double fd_step(double xj) { return 1e-6 * (1.0 + std::abs(xj)); }

// Central differences of a vector-valued map, column j = d map / d x_j.
template <typename F>
Mat central_jacobian(const Vec& x, Index rows, F&& map) {
  Mat jac(rows, x.size());
  Vec xp = x;
  for (Index j = 0; j < x.size(); ++j) {
    const double h = fd_step(x(j));
    xp(j) = x(j) + h;
    const Vec up = map(xp);
    xp(j) = x(j) - h;
    const Vec um = map(xp);
    xp(j) = x(j);
    jac.col(j) = (up - um) / (2.0 * h);
  }
  return jac;
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Mat fd_hess_f(const NsdpProblem& prob, const Vec& x) {
  return symmetrize(central_jacobian(x, prob.n(), [&](const Vec& p) { return prob.grad_f(p); }));
}

Mat fd_hess_g(const NsdpProblem& prob, const Vec& x, const Vec& y) {
  if (prob.m() == 0) return Mat::Zero(prob.n(), prob.n());
  return symmetrize(
      central_jacobian(x, prob.n(), [&](const Vec& p) -> Vec { return prob.jac_g(p) * y; }));
}

Mat fd_hess_X_contract(const NsdpProblem& prob, const Vec& x, const SymMat& Z) {
  return symmetrize(
      central_jacobian(x, prob.n(), [&](const Vec& p) { return apply_A_adjoint(prob, p, Z); }));
}

Mat NsdpProblem::hess_f(const Vec& x) const { return fd_hess_f(*this, x); }

Mat NsdpProblem::hess_g(const Vec& x, const Vec& y) const { return fd_hess_g(*this, x, y); }

Mat NsdpProblem::hess_X_contract(const Vec& x, const SymMat& Z) const {
  return fd_hess_X_contract(*this, x, Z);
}

std::vector<SymMat> NsdpProblem::A_all(const Vec& x) const {
  std::vector<SymMat> ops;
  ops.reserve(static_cast<std::size_t>(n()));
  for (Index j = 0; j < n(); ++j) ops.push_back(A(x, j));
  return ops;
}

// ---------------------------------------------------------------------------

double PrimalDualPoint::norm() const { return x.norm() + y.norm() + Z.frobenius(); }

PrimalDualPoint PrimalDualPoint::operator+(const PrimalDualPoint& o) const {
  return {x + o.x, y + o.y, Z + o.Z};
}

PrimalDualPoint PrimalDualPoint::operator-(const PrimalDualPoint& o) const {
  return {x - o.x, y - o.y, Z - o.Z};
}

PrimalDualPoint PrimalDualPoint::operator*(double s) const { return {s * x, s * y, Z * s}; }

double distance(const PrimalDualPoint& a, const PrimalDualPoint& b) { return (a - b).norm(); }

void check_point(const NsdpProblem& prob, const PrimalDualPoint& v) {
  if (v.x.size() != prob.n() || v.y.size() != prob.m() || v.Z.dim() != prob.d()) {
    std::ostringstream os;
    os << "point dimensions (" << v.x.size() << ", " << v.y.size() << ", " << v.Z.dim()
       << ") do not match problem (n, m, d) = (" << prob.n() << ", " << prob.m() << ", "
       << prob.d() << ")";
    throw ContractError(os.str());
  }
}

SymMat combine(std::span<const SymMat> ops, const Vec& u) {
  if (static_cast<Index>(ops.size()) != u.size()) {
    throw ContractError("combine: coefficient count does not match operator count");
  }
  if (ops.empty()) throw ContractError("combine: no operators");
  Mat acc = Mat::Zero(ops.front().dim(), ops.front().dim());
  for (std::size_t j = 0; j < ops.size(); ++j) acc += u(static_cast<Index>(j)) * ops[j].mat();
  return SymMat(acc);
}

Vec adjoint(std::span<const SymMat> ops, const SymMat& U) {
  Vec out(static_cast<Index>(ops.size()));
  for (std::size_t j = 0; j < ops.size(); ++j) out(static_cast<Index>(j)) = inner(ops[j], U);
  return out;
}

SymMat apply_A(const NsdpProblem& prob, const Vec& x, const Vec& u) {
  if (x.size() != prob.n() || u.size() != prob.n()) {
    throw ContractError("apply_A: vector length does not match n");
  }
  return combine(prob.A_all(x), u);
}

Vec apply_A_adjoint(const NsdpProblem& prob, const Vec& x, const SymMat& U) {
  if (x.size() != prob.n()) throw ContractError("apply_A_adjoint: x length does not match n");
  if (U.dim() != prob.d()) throw ContractError("apply_A_adjoint: U dimension does not match d");
  return adjoint(prob.A_all(x), U);
}

double lagrangian(const NsdpProblem& prob, const PrimalDualPoint& v) {
  check_point(prob, v);
  double val = prob.f(v.x) - inner(v.Z, prob.X(v.x));
  if (prob.m() > 0) val -= v.y.dot(prob.g(v.x));
  return val;
}

Vec grad_lagrangian(const NsdpProblem& prob, const PrimalDualPoint& v) {
  check_point(prob, v);
  Vec grad = prob.grad_f(v.x) - apply_A_adjoint(prob, v.x, v.Z);
  if (prob.m() > 0) grad -= prob.jac_g(v.x) * v.y;
  return grad;
}

Mat hess_lagrangian(const NsdpProblem& prob, const PrimalDualPoint& v) {
  check_point(prob, v);
  Mat h = prob.hess_f(v.x) - prob.hess_X_contract(v.x, v.Z);
  if (prob.m() > 0) h -= prob.hess_g(v.x, v.y);
  return symmetrize(h);
}

Mat curvature_term(const NsdpProblem& prob, const Vec& x, const SymMat& Z, double tol) {
  if (Z.dim() != prob.d()) throw ContractError("curvature_term: Z dimension does not match d");
  const Index n = prob.n();
  if (Z.is_zero()) return Mat::Zero(n, n);
  const SymMat xp = pinv(prob.X(x), tol);
  const auto ops = prob.A_all(x);
  Mat h(n, n);
  for (Index i = 0; i < n; ++i) {
    const Mat zaixp = Z.mat() * ops[static_cast<std::size_t>(i)].mat() * xp.mat();
    for (Index j = 0; j < n; ++j) {
      // <Z, A_i X^+ A_j> = tr(Z A_i X^+ A_j)
      h(i, j) = 2.0 * (zaixp.array() * ops[static_cast<std::size_t>(j)].mat().transpose().array()).sum();
    }
  }
  return symmetrize(h);
}

KktParts kkt_parts(const NsdpProblem& prob, const PrimalDualPoint& v) {
  KktParts parts;
  parts.stationarity = grad_lagrangian(prob, v).norm();
  parts.equality = prob.m() > 0 ? prob.g(v.x).norm() : 0.0;
  const SymMat xv = prob.X(v.x);
  parts.complementarity = (xv - proj_psd(xv - v.Z)).frobenius();
  return parts;
}

double kkt_residual(const NsdpProblem& prob, const PrimalDualPoint& v) {
  return kkt_parts(prob, v).total();
}

KktParts perturbed_kkt_parts(const NsdpProblem& prob, const PrimalDualPoint& v,
                             const KktPerturbation& u) {
  check_point(prob, v);
  if (u.r.size() != prob.n() || u.s.size() != prob.m() || u.T.dim() != prob.d()) {
    throw ContractError("perturbed_kkt_residual: perturbation dimensions do not match problem");
  }
  KktParts parts;
  parts.stationarity = (grad_lagrangian(prob, v) + u.r).norm();
  parts.equality = prob.m() > 0 ? (prob.g(v.x) + u.s).norm() : 0.0;
  const SymMat shifted = prob.X(v.x) + u.T;
  parts.complementarity = (shifted - proj_psd(shifted - v.Z)).frobenius();
  return parts;
}

double perturbed_kkt_residual(const NsdpProblem& prob, const PrimalDualPoint& v,
                              const KktPerturbation& u) {
  return perturbed_kkt_parts(prob, v, u).total();
}

}  // namespace nsdp
