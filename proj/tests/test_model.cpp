#include "nsdp/model.hpp"
#include "nsdp/problems.hpp"

#include "doctest.h"
#include "support.hpp"

#include <cmath>

using namespace nsdp;
using testsupport::DiagonalProblem;
using testsupport::ScalarProblem;
using testsupport::gaussian_vec;
using testsupport::random_sym;

namespace {

PrimalDualPoint random_point(const NsdpProblem& p, std::mt19937_64& rng) {
  return {gaussian_vec(p.n(), rng), gaussian_vec(p.m(), rng), random_sym(p.d(), rng)};
}

// Entrywise relative error with the (1 + |b|) scaling.
double rel_err(const Mat& a, const Mat& b) {
  return ((a - b).array().abs() / (1.0 + b.array().abs())).maxCoeff();
}

}  // namespace

TEST_CASE("apply_A: zero, basis vectors and affine differences") {
  const PolynomialProblem prob(*find_problem("affine-qsdp"));
  std::mt19937_64 rng(1);
  const Vec x = gaussian_vec(3, rng);
  CHECK(apply_A(prob, x, Vec::Zero(3)).is_zero());
  for (Index j = 0; j < 3; ++j) {
    Vec e = Vec::Zero(3);
    e(j) = 1.0;
    CHECK((apply_A(prob, x, e) - prob.A(x, j)).frobenius() == 0.0);
  }
  const Vec x2 = gaussian_vec(3, rng);
  CHECK((apply_A(prob, x, x2 - x) - (prob.X(x2) - prob.X(x))).frobenius() <= 1e-14);
  CHECK_THROWS_AS(apply_A(prob, x, Vec::Zero(2)), ContractError);
}

TEST_CASE("adjoint identity holds on every registry problem") {
  std::mt19937_64 rng(2);
  for (const auto& spec : registry()) {
    const PolynomialProblem prob(spec);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const Vec x = gaussian_vec(prob.n(), rng), u = gaussian_vec(prob.n(), rng);
      const SymMat U = random_sym(prob.d(), rng);
      const double lhs = inner(apply_A(prob, x, u), U);
      const double rhs = u.dot(apply_A_adjoint(prob, x, U));
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs)));
    }
    CHECK_MESSAGE(worst <= 1e-12, spec.id);
  }
  const PolynomialProblem p(*find_problem("beta-2x2"));
  CHECK(apply_A_adjoint(p, Vec::Zero(3), SymMat::zero(2)).isZero());
}

TEST_CASE("adjoint of the diagonal operator reads the diagonal") {
  const DiagonalProblem prob(4);
  std::mt19937_64 rng(3);
  const SymMat U = random_sym(4, rng);
  const Vec adj = apply_A_adjoint(prob, Vec::Ones(4), U);
  for (Index i = 0; i < 4; ++i) CHECK(adj(i) == doctest::Approx(U(i, i)));
}

TEST_CASE("grad_lagrangian reduces to grad f without multipliers") {
  std::mt19937_64 rng(4);
  for (const auto& spec : registry()) {
    const PolynomialProblem prob(spec);
    const Vec x = gaussian_vec(prob.n(), rng);
    const PrimalDualPoint v{x, Vec::Zero(prob.m()), SymMat::zero(prob.d())};
    CHECK((grad_lagrangian(prob, v) - prob.grad_f(x)).norm() == 0.0);
  }
}

TEST_CASE("grad_lagrangian vanishes at stored KKT points") {
  for (const auto& spec : registry()) {
    const PolynomialProblem prob(spec);
    CHECK_MESSAGE(grad_lagrangian(prob, spec.reference->v).norm() <= 1e-10, spec.id);
    CHECK_MESSAGE(kkt_residual(prob, spec.reference->v) <= 1e-10, spec.id);
  }
}

TEST_CASE("grad_lagrangian matches central differences of L") {
  std::mt19937_64 rng(5);
  for (const auto& spec : registry()) {
    const PolynomialProblem prob(spec);
    for (int t = 0; t < 5; ++t) {
      PrimalDualPoint v = random_point(prob, rng);
      const Vec g = grad_lagrangian(prob, v);
      Vec fd(prob.n());
      for (Index j = 0; j < prob.n(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(v.x(j)));
        PrimalDualPoint p = v, q = v;
        p.x(j) += h;
        q.x(j) -= h;
        fd(j) = (lagrangian(prob, p) - lagrangian(prob, q)) / (2.0 * h);
      }
      CHECK_MESSAGE((g - fd).norm() <= 1e-5 * (1.0 + fd.norm()), spec.id);
    }
  }
}

TEST_CASE("hess_lagrangian: exact symmetry and central-difference agreement") {
  std::mt19937_64 rng(6);
  for (const auto& spec : registry()) {
    const PolynomialProblem prob(spec);
    for (int t = 0; t < 5; ++t) {
      const PrimalDualPoint v = random_point(prob, rng);
      const Mat h = hess_lagrangian(prob, v);
      CHECK(h == h.transpose());
      Mat fd(prob.n(), prob.n());
      for (Index j = 0; j < prob.n(); ++j) {
        const double step = 1e-6 * (1.0 + std::abs(v.x(j)));
        PrimalDualPoint p = v, q = v;
        p.x(j) += step;
        q.x(j) -= step;
        fd.col(j) = (grad_lagrangian(prob, p) - grad_lagrangian(prob, q)) / (2.0 * step);
      }
      CHECK_MESSAGE(rel_err(h, fd) <= 1e-4, spec.id);
    }
  }
}

TEST_CASE("hess_lagrangian: affine data and quadratic objective") {
  const PolynomialProblem prob(*find_problem("affine-qsdp"));
  std::mt19937_64 rng(7);
  const PrimalDualPoint v = random_point(prob, rng);
  Mat q(3, 3);
  q << 2, .5, 0, .5, 2, 0, 0, 0, 1;
  CHECK((hess_lagrangian(prob, v) - prob.hess_f(v.x)).norm() == 0.0);
  CHECK((hess_lagrangian(prob, v) - q).norm() <= 1e-15);
}

TEST_CASE("finite-difference second-order fallback agrees with analytic callbacks") {
  std::mt19937_64 rng(8);
  for (const auto& spec : registry()) {
    const PolynomialProblem prob(spec);
    const FiniteDifferenceSecondOrder fd(prob);
    const PrimalDualPoint v = random_point(prob, rng);
    CHECK_MESSAGE(rel_err(hess_lagrangian(fd, v), hess_lagrangian(prob, v)) <= 1e-5, spec.id);
  }
}

TEST_CASE("curvature term examples") {
  const PolynomialProblem prob(*find_problem("nonlinear-3x3"));
  std::mt19937_64 rng(9);
  const Vec x = gaussian_vec(4, rng);
  CHECK(curvature_term(prob, x, SymMat::zero(3), 1e-8).isZero());

  // X(x) positive definite and complementary Z: Z must vanish.
  const DiagonalProblem diag(3);
  CHECK(curvature_term(diag, Vec::Ones(3), SymMat::zero(3), 1e-8).isZero());

  // Scalar X(x) = x, A = 1: entry 2 z a^2 / x, or 0 when x = 0.
  const ScalarProblem scalar(1.0, 0.0);
  const SymMat z(Mat::Constant(1, 1, 0.75));
  CHECK(curvature_term(scalar, Vec::Constant(1, 0.5), z, 1e-8)(0, 0) == doctest::Approx(2 * 0.75 / 0.5));
  CHECK(curvature_term(scalar, Vec::Constant(1, 0.0), z, 1e-8)(0, 0) == 0.0);
}

TEST_CASE("kkt_residual on min x^2 s.t. x PSD") {
  const PolynomialProblem prob(*find_problem("scalar-degenerate"));
  const PrimalDualPoint kkt{Vec::Zero(1), Vec(0), SymMat::zero(1)};
  CHECK(kkt_residual(prob, kkt) == 0.0);
  const PrimalDualPoint one{Vec::Ones(1), Vec(0), SymMat::zero(1)};
  CHECK(kkt_residual(prob, one) == doctest::Approx(2.0));
  const KktParts parts = kkt_parts(prob, one);
  CHECK(parts.stationarity == doctest::Approx(2.0));
  CHECK(parts.equality == 0.0);
  CHECK(parts.complementarity == 0.0);
}

TEST_CASE("perturbed residual: zero perturbation and a constructed zero") {
  std::mt19937_64 rng(10);
  for (const auto& spec : registry()) {
    const PolynomialProblem prob(spec);
    const PrimalDualPoint v = random_point(prob, rng);
    const KktPerturbation zero{Vec::Zero(prob.n()), Vec::Zero(prob.m()), SymMat::zero(prob.d())};
    CHECK(perturbed_kkt_residual(prob, v, zero) == doctest::Approx(kkt_residual(prob, v)).epsilon(1e-14));

    // X + T = P(R) and Z = P(-R) form a complementary pair.
    const SymMat r = random_sym(prob.d(), rng);
    PrimalDualPoint w = v;
    w.Z = proj_psd(r * -1.0);
    const KktPerturbation u{-grad_lagrangian(prob, w), -prob.g(w.x), proj_psd(r) - prob.X(w.x)};
    CHECK(perturbed_kkt_residual(prob, w, u) <= 1e-12);
  }
}

TEST_CASE("dimension checks") {
  const PolynomialProblem prob(*find_problem("affine-qsdp"));
  const PrimalDualPoint bad{Vec::Zero(2), Vec::Zero(1), SymMat::zero(2)};
  CHECK_THROWS_AS(kkt_residual(prob, bad), ContractError);
  const PrimalDualPoint p{Vec::Ones(3), Vec::Ones(1), SymMat::identity(2)};
  CHECK(p.norm() == doctest::Approx(std::sqrt(3.0) + 1.0 + std::sqrt(2.0)));
  CHECK(distance(p, p * 2.0) == doctest::Approx(p.norm()));
}
