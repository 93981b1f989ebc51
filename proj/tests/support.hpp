#pragma once

#include "nsdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace testsupport {

using nsdp::Index;
using nsdp::Mat;
using nsdp::SymMat;
using nsdp::Vec;

inline Mat gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Vec gaussian_vec(Index n, std::mt19937_64& rng) { return gaussian(n, 1, rng).col(0); }

inline SymMat random_sym(Index d, std::mt19937_64& rng) { return SymMat(gaussian(d, d, rng)); }

/// Random orthogonal matrix from a QR factorization.
inline Mat random_orthogonal(Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Mat> qr(gaussian(d, d, rng));
  return qr.householderQ() * Mat::Identity(d, d);
}

inline SymMat with_spectrum(const Vec& lambda, const Mat& basis) {
  return SymMat(Mat(basis * lambda.asDiagonal() * basis.transpose()));
}

/// minimize c x^2 / 2 + b x subject to [x] PSD (n = 1, m = 0, d = 1).
class ScalarProblem : public nsdp::NsdpProblem {
 public:
  ScalarProblem(double c, double b) : c_(c), b_(b) {}
  Index n() const override { return 1; }
  Index m() const override { return 0; }
  Index d() const override { return 1; }
  double f(const Vec& x) const override { return 0.5 * c_ * x(0) * x(0) + b_ * x(0); }
  Vec grad_f(const Vec& x) const override { return Vec::Constant(1, c_ * x(0) + b_); }
  Vec g(const Vec&) const override { return Vec(0); }
  Mat jac_g(const Vec&) const override { return Mat(1, 0); }
  SymMat X(const Vec& x) const override { return SymMat(Mat::Constant(1, 1, x(0))); }
  SymMat A(const Vec&, Index) const override { return SymMat::identity(1); }

 private:
  double c_, b_;
};

/// X(x) = diag(x), f = |x|^2 / 2, no equality constraints.
class DiagonalProblem : public nsdp::NsdpProblem {
 public:
  explicit DiagonalProblem(Index n) : n_(n) {}
  Index n() const override { return n_; }
  Index m() const override { return 0; }
  Index d() const override { return n_; }
  double f(const Vec& x) const override { return 0.5 * x.squaredNorm(); }
  Vec grad_f(const Vec& x) const override { return x; }
  Vec g(const Vec&) const override { return Vec(0); }
  Mat jac_g(const Vec&) const override { return Mat(n_, 0); }
  SymMat X(const Vec& x) const override { return SymMat::diagonal(x); }
  SymMat A(const Vec&, Index j) const override {
    Vec e = Vec::Zero(n_);
    e(j) = 1.0;
    return SymMat::diagonal(e);
  }

 private:
  Index n_;
};

}  // namespace testsupport

#include "nsdp/subqp.hpp"

namespace testsupport {

struct SubproblemShape {
  Index n = 3;
  Index m = 1;
  Index d = 2;
};

/// Random stabilized subproblem. H = B B^T + 0.1 I when convex, otherwise
/// a symmetric Gaussian. sigma is log-uniform in [1e-3, 1].
inline nsdp::StabilizedSubproblem random_subproblem(const SubproblemShape& s, bool convex,
                                                    std::mt19937_64& rng) {
  nsdp::StabilizedSubproblem sp;
  sp.gradf = gaussian_vec(s.n, rng);
  if (convex) {
    const Mat b = gaussian(s.n, s.n, rng);
    sp.H = b * b.transpose() + 0.1 * Mat::Identity(s.n, s.n);
  } else {
    sp.H = random_sym(s.n, rng).mat();
  }
  sp.gval = gaussian_vec(s.m, rng);
  sp.Jg = gaussian(s.n, s.m, rng);
  sp.Xval = random_sym(s.d, rng);
  for (Index j = 0; j < s.n; ++j) sp.Aops.push_back(random_sym(s.d, rng));
  std::uniform_real_distribution<double> u(-3.0, 0.0);
  sp.sigma = std::pow(10.0, u(rng));
  sp.yref = gaussian_vec(s.m, rng);
  sp.Zref = random_sym(s.d, rng);
  sp.validate();
  return sp;
}

inline SubproblemShape random_shape(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(1, 4), dd(1, 3);
  SubproblemShape s;
  s.n = nd(rng);
  s.m = std::uniform_int_distribution<int>(0, static_cast<int>(std::min<Index>(2, s.n - 1)))(rng);
  s.d = dd(rng);
  return s;
}

/// Makes the linearized constraints g + Jg^T xi = 0, X + A xi PSD of the
/// unstabilized subproblem infeasible: Jg = 0 with g != 0 and A = 0 with
/// X negative definite.
inline void break_linearization(nsdp::StabilizedSubproblem& sp) {
  if (sp.m() > 0) {
    sp.Jg.setZero();
    sp.gval = sp.gval.cwiseAbs() + Vec::Ones(sp.m());
  }
  for (auto& a : sp.Aops) a = SymMat::zero(sp.d());
  sp.Xval = SymMat(Mat(-sp.Xval.mat() * sp.Xval.mat() - Mat::Identity(sp.d(), sp.d())));
}

}  // namespace testsupport
