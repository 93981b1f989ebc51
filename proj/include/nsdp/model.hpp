#pragma once

// Problem abstraction for
//
//   minimize f(x)  subject to  g(x) = 0,  X(x) PSD,
//
// with Lagrangian L(x, y, Z) = f(x) - <y, g(x)> - <Z, X(x)>, plus the
// operators built from the partial derivatives A_j(x) = dX/dx_j.

#include "nsdp/symkernel.hpp"

#include <span>
#include <vector>

namespace nsdp {

/// Evaluation contract of a problem instance. Implementations must be
/// read-only after construction so that one instance can serve concurrent
/// solver runs.
///
/// The second-order callbacks have central-difference defaults built from
/// the first-order ones (step 1e-6 (1 + |x_j|)); problems with analytic
/// second derivatives override them.
class NsdpProblem {
 public:
  virtual ~NsdpProblem() = default;

  virtual Index n() const = 0;
  virtual Index m() const = 0;
  virtual Index d() const = 0;

  virtual double f(const Vec& x) const = 0;
  virtual Vec grad_f(const Vec& x) const = 0;
  virtual Mat hess_f(const Vec& x) const;

  /// g(x) in R^m.
  virtual Vec g(const Vec& x) const = 0;
  /// n x m matrix [grad g_1, ..., grad g_m].
  virtual Mat jac_g(const Vec& x) const = 0;
  /// sum_i y_i * hess g_i(x).
  virtual Mat hess_g(const Vec& x, const Vec& y) const;

  virtual SymMat X(const Vec& x) const = 0;
  /// A_j(x) = dX/dx_j, j in [0, n).
  virtual SymMat A(const Vec& x, Index j) const = 0;
  /// n x n matrix with entries <Z, d^2 X / dx_i dx_j>.
  virtual Mat hess_X_contract(const Vec& x, const SymMat& Z) const;

  std::vector<SymMat> A_all(const Vec& x) const;
};

/// Forces finite-difference second derivatives on top of any problem, so
/// analytic callbacks can be compared against the fallback.
class FiniteDifferenceSecondOrder final : public NsdpProblem {
 public:
  explicit FiniteDifferenceSecondOrder(const NsdpProblem& inner) : inner_(inner) {}

  Index n() const override { return inner_.n(); }
  Index m() const override { return inner_.m(); }
  Index d() const override { return inner_.d(); }
  double f(const Vec& x) const override { return inner_.f(x); }
  Vec grad_f(const Vec& x) const override { return inner_.grad_f(x); }
  Vec g(const Vec& x) const override { return inner_.g(x); }
  Mat jac_g(const Vec& x) const override { return inner_.jac_g(x); }
  SymMat X(const Vec& x) const override { return inner_.X(x); }
  SymMat A(const Vec& x, Index j) const override { return inner_.A(x, j); }

 private:
  const NsdpProblem& inner_;
};

/// Primal-dual point v = (x, y, Z). Z need not be PSD.
struct PrimalDualPoint {
  Vec x;
  Vec y;
  SymMat Z;

  /// ||x||_2 + ||y||_2 + ||Z||_F.
  double norm() const;

  PrimalDualPoint operator+(const PrimalDualPoint& o) const;
  PrimalDualPoint operator-(const PrimalDualPoint& o) const;
  PrimalDualPoint operator*(double s) const;
};

double distance(const PrimalDualPoint& a, const PrimalDualPoint& b);

/// Perturbation (r, s, T) of the KKT system.
struct KktPerturbation {
  Vec r;
  Vec s;
  SymMat T;
};

/// The three residual norms whose sum is sigma(v).
struct KktParts {
  double stationarity = 0.0;
  double equality = 0.0;
  double complementarity = 0.0;
  double total() const { return stationarity + equality + complementarity; }
};

void check_point(const NsdpProblem& prob, const PrimalDualPoint& v);

/// sum_j u_j A_j.
SymMat combine(std::span<const SymMat> ops, const Vec& u);
/// (<A_1, U>, ..., <A_n, U>).
Vec adjoint(std::span<const SymMat> ops, const SymMat& U);

SymMat apply_A(const NsdpProblem& prob, const Vec& x, const Vec& u);
Vec apply_A_adjoint(const NsdpProblem& prob, const Vec& x, const SymMat& U);

double lagrangian(const NsdpProblem& prob, const PrimalDualPoint& v);
Vec grad_lagrangian(const NsdpProblem& prob, const PrimalDualPoint& v);
Mat hess_lagrangian(const NsdpProblem& prob, const PrimalDualPoint& v);

/// Sigma-term of the second-order condition: entries 2 <Z, A_i X^+ A_j>,
/// symmetrized. The pseudoinverse uses tolerance tol.
Mat curvature_term(const NsdpProblem& prob, const Vec& x, const SymMat& Z, double tol);

KktParts kkt_parts(const NsdpProblem& prob, const PrimalDualPoint& v);

/// sigma(v) = ||grad_x L|| + ||g|| + ||X - P(X - Z)||_F.
double kkt_residual(const NsdpProblem& prob, const PrimalDualPoint& v);

KktParts perturbed_kkt_parts(const NsdpProblem& prob, const PrimalDualPoint& v,
                             const KktPerturbation& u);
double perturbed_kkt_residual(const NsdpProblem& prob, const PrimalDualPoint& v,
                              const KktPerturbation& u);

// Central-difference second derivatives used by the NsdpProblem defaults.
Mat fd_hess_f(const NsdpProblem& prob, const Vec& x);
Mat fd_hess_g(const NsdpProblem& prob, const Vec& x, const Vec& y);
Mat fd_hess_X_contract(const NsdpProblem& prob, const Vec& x, const SymMat& Z);

}  // namespace nsdp
