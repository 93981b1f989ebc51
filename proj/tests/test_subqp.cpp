#include "nsdp/problems.hpp"
#include "nsdp/subqp.hpp"

#include "doctest.h"
#include "support.hpp"

#include <cmath>

using namespace nsdp;
using testsupport::gaussian_vec;
using testsupport::random_shape;
using testsupport::random_subproblem;
using testsupport::random_sym;

namespace {

double sum_dist(const SubproblemPoint& a, const SubproblemPoint& b) {
  return (a.xi - b.xi).norm() + (a.zeta - b.zeta).norm() + (a.Sigma - b.Sigma).frobenius();
}

// Second implementation of the three residual blocks, written out entrywise.
SubproblemResiduals residuals_by_hand(const StabilizedSubproblem& sp, const SubproblemPoint& w) {
  const Index n = sp.n(), m = sp.m(), d = sp.d();
  Vec r1(n);
  for (Index j = 0; j < n; ++j) {
    double s = sp.gradf(j);
    for (Index k = 0; k < n; ++k) s += sp.H(j, k) * w.xi(k);
    for (Index i = 0; i < m; ++i) s -= sp.Jg(j, i) * w.zeta(i);
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) s -= sp.Aops[static_cast<std::size_t>(j)](a, b) * w.Sigma(a, b);
    r1(j) = s;
  }
  Vec r2(m);
  for (Index i = 0; i < m; ++i) {
    double s = sp.gval(i) + sp.sigma * (w.zeta(i) - sp.yref(i));
    for (Index j = 0; j < n; ++j) s += sp.Jg(j, i) * w.xi(j);
    r2(i) = s;
  }
  Mat slack = sp.Xval.mat() + sp.sigma * (w.Sigma.mat() - sp.Zref.mat());
  for (Index j = 0; j < n; ++j) slack += w.xi(j) * sp.Aops[static_cast<std::size_t>(j)].mat();
  Eigen::SelfAdjointEigenSolver<Mat> es(slack - w.Sigma.mat());
  const Mat proj = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                   es.eigenvectors().transpose();
  return {r1.norm(), r2.norm(), (slack - proj).norm()};
}

StabilizedSubproblem affine_snapshot(double radius, std::uint64_t seed) {
  static const PolynomialProblem prob(*find_problem("affine-qsdp"));
  std::mt19937_64 rng(seed);
  PrimalDualPoint v = find_problem("affine-qsdp")->reference->v;
  v.x += radius * gaussian_vec(3, rng);
  v.y += radius * gaussian_vec(1, rng);
  v.Z += random_sym(2, rng) * radius;
  return build_subproblem(prob, v, hess_lagrangian(prob, v), kkt_residual(prob, v));
}

}  // namespace

TEST_CASE("build copies the problem data at the iterate") {
  const PolynomialProblem prob(*find_problem("nonlinear-3x3"));
  std::mt19937_64 rng(1);
  const PrimalDualPoint v{gaussian_vec(4, rng), gaussian_vec(1, rng), random_sym(3, rng)};
  const Mat h = hess_lagrangian(prob, v);
  const StabilizedSubproblem sp = build_subproblem(prob, v, h, 0.25, 0.5);
  CHECK(sp.gradf == prob.grad_f(v.x));
  CHECK(sp.H == h);
  CHECK(sp.gval == prob.g(v.x));
  CHECK(sp.Jg == prob.jac_g(v.x));
  CHECK(sp.Xval.mat() == prob.X(v.x).mat());
  for (Index j = 0; j < 4; ++j) CHECK(sp.Aops[static_cast<std::size_t>(j)].mat() == prob.A(v.x, j).mat());
  CHECK(sp.yref == v.y);
  CHECK(sp.Zref.mat() == v.Z.mat());
  CHECK(sp.sigma == 0.25);
  REQUIRE(sp.nu.has_value());
  CHECK(*sp.nu == 0.5);
  CHECK_THROWS_AS(build_subproblem(prob, v, h, 0.0), ContractError);
}

TEST_CASE("subproblem residual matches an entrywise recomputation") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const StabilizedSubproblem sp = random_subproblem(random_shape(rng), t % 2 == 0, rng);
    const SubproblemPoint w{gaussian_vec(sp.n(), rng), gaussian_vec(sp.m(), rng), random_sym(sp.d(), rng)};
    const SubproblemResiduals a = subproblem_residuals(sp, w);
    const SubproblemResiduals b = residuals_by_hand(sp, w);
    CHECK(a.stationarity == doctest::Approx(b.stationarity).epsilon(1e-12));
    CHECK(a.equality == doctest::Approx(b.equality).epsilon(1e-12));
    CHECK(a.complementarity == doctest::Approx(b.complementarity).epsilon(1e-9));
    CHECK(subproblem_kkt_residual(sp, w) == doctest::Approx(a.total()).epsilon(1e-14));
  }
}

TEST_CASE("eliminate_zeta") {
  std::mt19937_64 rng(3);
  StabilizedSubproblem sp = random_subproblem({3, 2, 2}, true, rng);
  const Vec xi = gaussian_vec(3, rng);
  const SubproblemPoint w{xi, eliminate_zeta(sp, xi), random_sym(2, rng)};
  CHECK(subproblem_residuals(sp, w).equality <= 1e-13);
  sp.gval.setZero();
  CHECK((eliminate_zeta(sp, Vec::Zero(3)) - sp.yref).norm() == 0.0);
  const StabilizedSubproblem none = random_subproblem({2, 0, 2}, true, rng);
  CHECK(eliminate_zeta(none, Vec::Ones(2)).size() == 0);
}

TEST_CASE("the stabilized subproblem always has a feasible point") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    StabilizedSubproblem sp = random_subproblem(random_shape(rng), t % 3 != 0, rng);
    if (t % 2 == 0) testsupport::break_linearization(sp);
    const SubproblemPoint w = feasible_point(sp);
    const SubproblemResiduals r = subproblem_residuals(sp, w);
    CHECK(w.xi.isZero());
    CHECK(r.equality <= 1e-12 * (1.0 + sp.gval.norm()));
    CHECK(r.complementarity <= 1e-12 * (1.0 + sp.Xval.frobenius() + sp.sigma * sp.Zref.frobenius()));
  }
}

TEST_CASE("Newton converges fast near the solution of a convex problem") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const StabilizedSubproblem sp = affine_snapshot(1e-2, seed);
    SubproblemConfig cfg;
    cfg.tolerance = 1e-10;
    const SubproblemSolution sol = solve_subproblem(sp, cfg);
    CHECK(sol.status == SubproblemStatus::converged);
    CHECK(sol.kkt_res <= 1e-10);
    CHECK(sol.newton_iters <= 15);
    // Splitting oracle from several starting matrices.
    std::mt19937_64 rng(seed);
    for (int s = 0; s < 3; ++s) {
      SubproblemConfig ocfg;
      ocfg.tolerance = 1e-10;
      const SubproblemSolution ref =
          solve_subproblem_splitting(sp, ocfg, s == 0 ? std::nullopt : std::optional<SymMat>(random_sym(2, rng)));
      REQUIRE(ref.status != SubproblemStatus::failed);
      CHECK(sum_dist(ref.w, sol.w) <= 1e-7);
    }
  }
}

TEST_CASE("Newton and splitting agree on random convex instances") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    const StabilizedSubproblem sp = random_subproblem(random_shape(rng), true, rng);
    SubproblemConfig cfg;
    cfg.tolerance = 1e-12;
    SubproblemConfig oracle;
    oracle.tolerance = 1e-10;
    const SubproblemSolution a = solve_subproblem(sp, cfg);
    const SubproblemSolution b = solve_subproblem_splitting(sp, oracle);
    REQUIRE(a.status != SubproblemStatus::failed);
    REQUIRE(b.status != SubproblemStatus::failed);
    CHECK(sum_dist(a.w, b.w) <= 1e-6);
  }
}

TEST_CASE("converged solutions satisfy the conic complementarity conditions") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 40; ++t) {
    const StabilizedSubproblem sp = random_subproblem(random_shape(rng), true, rng);
    SubproblemConfig cfg;
    cfg.tolerance = 1e-12;
    const SubproblemSolution sol = solve_subproblem(sp, cfg);
    REQUIRE(sol.status != SubproblemStatus::failed);
    CHECK(sol.kkt_res <= sol.tolerance);
    const SymMat slack = sp.Xval + combine(sp.Aops, sol.w.xi) + (sol.w.Sigma - sp.Zref) * sp.sigma;
    const double scale = 1.0 + slack.frobenius() + sol.w.Sigma.frobenius();
    CHECK(eig(slack).values.minCoeff() >= -1e-8 * scale);
    CHECK(std::abs(inner(slack, sol.w.Sigma)) <= 1e-8 * scale * scale);
    CHECK(eig(sol.w.Sigma).values.minCoeff() >= -1e-8 * scale);
  }
}

TEST_CASE("large sigma: the solution is a stationary point of the reduced problem") {
  std::mt19937_64 rng(7);
  StabilizedSubproblem sp = random_subproblem({3, 2, 2}, true, rng);
  sp.sigma = 1.0;
  sp.yref += Vec::Constant(2, 5.0);
  SubproblemConfig cfg;
  cfg.tolerance = 1e-12;
  const SubproblemSolution sol = solve_subproblem(sp, cfg);
  REQUIRE(sol.status != SubproblemStatus::failed);
  CHECK((sol.w.zeta - eliminate_zeta(sp, sol.w.xi)).norm() <= 1e-11);
  CHECK((sol.w.Sigma - dual_matrix_for(sp, sol.w.xi)).frobenius() <= 1e-10);
  CHECK(reduced_gradient(sp, sol.w.xi).norm() <= 1e-10);
}

TEST_CASE("scalar instance matches a grid search") {
  // min a xi + h xi^2 / 2 + sigma Sigma^2 / 2  s.t.  x + b xi + sigma (Sigma - z) >= 0.
  struct Case {
    double a, h, x, b, z, sigma;
  };
  const Case cases[] = {{1.0, 2.0, 0.3, 1.0, 0.1, 0.5},
                        {-1.0, 1.0, 0.2, 1.0, 0.5, 0.1},
                        {2.0, 1.0, -0.1, 0.5, -0.2, 0.3},
                        {0.5, 3.0, 1.0, -2.0, 0.0, 0.05}};
  for (const auto& c : cases) {
    StabilizedSubproblem sp;
    sp.gradf = Vec::Constant(1, c.a);
    sp.H = Mat::Constant(1, 1, c.h);
    sp.gval = Vec(0);
    sp.Jg = Mat(1, 0);
    sp.Xval = SymMat(Mat::Constant(1, 1, c.x));
    sp.Aops = {SymMat(Mat::Constant(1, 1, c.b))};
    sp.sigma = c.sigma;
    sp.yref = Vec(0);
    sp.Zref = SymMat(Mat::Constant(1, 1, c.z));

    auto obj = [&](double xi, double s) { return c.a * xi + 0.5 * c.h * xi * xi + 0.5 * c.sigma * s * s; };
    auto feasible = [&](double xi, double s) { return c.x + c.b * xi + c.sigma * (s - c.z) >= 0.0; };
    double best = INFINITY, bx = 0, bs = 0;
    double cx = 0.0, cs = 0.0, width = 10.0;
    for (int level = 0; level < 6; ++level) {
      const int steps = 200;
      for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
          const double xi = cx - width + 2.0 * width * i / steps;
          const double s = cs - width + 2.0 * width * j / steps;
          if (feasible(xi, s) && obj(xi, s) < best) {
            best = obj(xi, s);
            bx = xi;
            bs = s;
          }
        }
      cx = bx;
      cs = bs;
      width /= 20.0;
    }
    const SubproblemSolution sol = solve_subproblem(sp);
    REQUIRE(sol.status != SubproblemStatus::failed);
    CHECK(sol.w.xi(0) == doctest::Approx(bx).epsilon(1e-4).scale(1.0));
    CHECK(sol.w.Sigma(0, 0) == doctest::Approx(bs).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("scaling all data and sigma by a constant leaves the solution unchanged") {
  for (std::uint64_t seed = 11; seed <= 13; ++seed) {
    const StabilizedSubproblem sp = affine_snapshot(5e-2, seed);
    StabilizedSubproblem scaled = sp;
    const double c = 3.5;
    scaled.gradf *= c;
    scaled.H *= c;
    scaled.gval *= c;
    scaled.Jg *= c;
    scaled.Xval = sp.Xval * c;
    for (auto& a : scaled.Aops) a = a * c;
    scaled.sigma *= c;
    SubproblemConfig cfg;
    cfg.tolerance = 1e-13;
    const SubproblemSolution a = solve_subproblem(sp, cfg);
    const SubproblemSolution b = solve_subproblem(scaled, cfg);
    CHECK(sum_dist(a.w, b.w) <= 1e-9);
  }
}

TEST_CASE("ball safeguard keeps the step inside the radius") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    StabilizedSubproblem sp = random_subproblem({3, 1, 2}, true, rng);
    SubproblemConfig cfg;
    const SubproblemSolution free_sol = solve_subproblem(sp, cfg);
    REQUIRE(free_sol.status != SubproblemStatus::failed);
    const double len = free_sol.w.xi.norm();
    sp.nu = 0.5 * len;
    const SubproblemSolution ball = solve_subproblem(sp, cfg);
    CHECK(ball.w.xi.norm() <= *sp.nu * (1.0 + 1e-12));
    CHECK(ball.ball_active);
    sp.nu = 2.0 * len + 1.0;
    const SubproblemSolution loose = solve_subproblem(sp, cfg);
    CHECK_FALSE(loose.ball_active);
    CHECK(sum_dist(loose.w, free_sol.w) <= 1e-9);
  }
}

TEST_CASE("nonconvex instances report a status instead of throwing") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 30; ++t) {
    const StabilizedSubproblem sp = random_subproblem(random_shape(rng), false, rng);
    SubproblemSolution sol;
    CHECK_NOTHROW(sol = solve_subproblem(sp));
    if (sol.status != SubproblemStatus::failed) CHECK(sol.kkt_res <= sol.tolerance);
  }
}

TEST_CASE("default tolerance") {
  CHECK(default_subproblem_tolerance(1e-6) == 1e-12);
  CHECK(default_subproblem_tolerance(1e-1) == doctest::Approx(1e-6));
}
