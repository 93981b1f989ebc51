#include "nsdp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nsdp {

PrimalDualPoint random_perturbation(Index n, Index m, Index d, double r, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  PrimalDualPoint p;
  for (;;) {
    p.x = Vec(n);
    p.y = Vec(m);
    Vec z(svec_size(d));
    for (Index i = 0; i < n; ++i) p.x(i) = gauss(rng);
    for (Index i = 0; i < m; ++i) p.y(i) = gauss(rng);
    for (Index i = 0; i < z.size(); ++i) z(i) = gauss(rng);
    p.Z = smat(z, d);
    const double len = p.norm();
    if (len > 1e-300) return p * (r / len);
  }
}

std::vector<RadiusStats> error_bound_probe(const NsdpProblem& prob, const PrimalDualPoint& vstar,
                                           std::span<const double> radii, int samples,
                                           std::uint64_t seed) {
  check_point(prob, vstar);
  const double s0 = kkt_residual(prob, vstar);
  if (s0 > 1e-10) {
    std::ostringstream os;
    os << "error_bound_probe: reference point is not a KKT point (sigma = " << s0 << ")";
    throw ContractError(os.str());
  }
  if (samples <= 0) throw ContractError("error_bound_probe: samples must be positive");

  std::mt19937_64 rng(seed);
  std::vector<RadiusStats> out;
  for (double r : radii) {
    if (!(r > 0.0)) throw ContractError("error_bound_probe: radii must be positive");
    RadiusStats st;
    st.radius = r;
    st.min_sigma_over_dist = st.min_dist_over_sigma = std::numeric_limits<double>::infinity();
    st.max_sigma_over_dist = st.max_dist_over_sigma = 0.0;
    for (int s = 0; s < samples; ++s) {
      const PrimalDualPoint v = vstar + random_perturbation(prob.n(), prob.m(), prob.d(), r, rng);
      const double dist = distance(v, vstar);
      const double sig = kkt_residual(prob, v);
      const double a = sig / dist;
      const double b = dist / sig;
      st.min_sigma_over_dist = std::min(st.min_sigma_over_dist, a);
      st.max_sigma_over_dist = std::max(st.max_sigma_over_dist, a);
      st.min_dist_over_sigma = std::min(st.min_dist_over_sigma, b);
      st.max_dist_over_sigma = std::max(st.max_dist_over_sigma, b);
      ++st.samples;
    }
    out.push_back(st);
  }
  return out;
}

SpectrumReport complementarity_spectrum(const NsdpProblem& prob, const PrimalDualPoint& v) {
  check_point(prob, v);
  const SymMat m = prob.X(v.x) - v.Z;
  SpectrumReport rep;
  rep.partition = partition(eig(m), default_eig_tol(m));
  rep.strict = rep.partition.beta.empty();
  return rep;
}

namespace {

constexpr double kConeTol = 1e-8;
constexpr int kProjectionRounds = 50;

// Data of the critical cone at x*:
//   {d : grad f^T d = 0, Jg^T d = 0, [P_b P_g]^T (A d) [P_b P_g] PSD}.
class CriticalCone {
 public:
  CriticalCone(const NsdpProblem& prob, const Vec& x) {
    const Index n = prob.n();
    gradf_ = prob.grad_f(x);
    jg_ = prob.m() > 0 ? prob.jac_g(x) : Mat(n, 0);
    Mat lin(1 + jg_.cols(), n);
    lin.row(0) = gradf_.transpose();
    if (jg_.cols() > 0) lin.bottomRows(jg_.cols()) = jg_.transpose();
    lin_pinv_ = Eigen::CompleteOrthogonalDecomposition<Mat>(lin).pseudoInverse();
    lin_ = lin;

    const SymMat xv = prob.X(x);
    xdec_ = eig(xv);
    part_ = partition(xdec_, default_eig_tol(xv));
    ops_ = prob.A_all(x);
    std::vector<Index> idx = part_.beta;
    idx.insert(idx.end(), part_.gamma.begin(), part_.gamma.end());
    pbg_ = select_columns(xdec_.basis, idx);
    if (!idx.empty()) {
      const Index k = static_cast<Index>(idx.size());
      Mat block_map(svec_size(k), n);
      for (Index j = 0; j < n; ++j) block_map.col(j) = svec(restrict(ops_[static_cast<std::size_t>(j)]));
      block_pinv_ = Eigen::CompleteOrthogonalDecomposition<Mat>(block_map).pseudoInverse();
    }
  }

  bool has_cone_block() const { return pbg_.cols() > 0; }

  Vec project_linear(const Vec& d) const { return d - lin_pinv_ * (lin_ * d); }

  Vec project_cone(const Vec& d) const {
    if (!has_cone_block()) return d;
    const SymMat b = restrict(combine(ops_, d));
    const SymMat fix = proj_psd(b) - b;
    if (fix.is_zero()) return d;
    return d + block_pinv_ * svec(fix);
  }

  // One round of alternating projections, renormalized. Empty when the
  // direction collapses.
  std::optional<Vec> pull(Vec d) const {
    for (int r = 0; r < kProjectionRounds; ++r) {
      d = project_cone(project_linear(d));
      const double len = d.norm();
      if (len < 1e-12) return std::nullopt;
      d /= len;
    }
    d = project_linear(d);
    const double len = d.norm();
    if (len < 1e-12) return std::nullopt;
    return Vec(d / len);
  }

  bool accepts(const Vec& d) const {
    if (std::abs(gradf_.dot(d)) > kConeTol) return false;
    if (jg_.cols() > 0 && (jg_.transpose() * d).norm() > kConeTol) return false;
    return tangent_cone_residual(xdec_, part_, combine(ops_, d)) <= kConeTol;
  }

  // Orthonormal basis of the null space of the linear constraints.
  Mat null_basis() const {
    Eigen::FullPivLU<Mat> lu(lin_);
    return Eigen::HouseholderQR<Mat>(lu.kernel()).householderQ() *
           Mat::Identity(lin_.cols(), lu.dimensionOfKernel());
  }

 private:
  SymMat restrict(const SymMat& m) const {
    return SymMat(Mat(pbg_.transpose() * m.mat() * pbg_));
  }

  Vec gradf_;
  Mat jg_;
  Mat lin_;
  Mat lin_pinv_;
  EigenDecomp xdec_;
  IndexPartition part_;
  std::vector<SymMat> ops_;
  Mat pbg_;
  Mat block_pinv_;
};

}  // namespace

SoscReport sosc_probe(const NsdpProblem& prob, const PrimalDualPoint& vstar, int num_dirs,
                      std::uint64_t seed) {
  check_point(prob, vstar);
  const double s0 = kkt_residual(prob, vstar);
  if (s0 > 1e-10) {
    std::ostringstream os;
    os << "sosc_probe: reference point is not a KKT point (sigma = " << s0 << ")";
    throw ContractError(os.str());
  }
  const Index n = prob.n();
  const SymMat xv = prob.X(vstar.x);
  const Mat g = hess_lagrangian(prob, vstar) +
                curvature_term(prob, vstar.x, vstar.Z, default_eig_tol(xv));
  const Mat curv = 0.5 * (g + g.transpose());
  const CriticalCone cone(prob, vstar.x);

  SoscReport rep;
  auto consider = [&](const Vec& d) {
    if (!cone.accepts(d)) return;
    ++rep.accepted;
    const double c = d.dot(curv * d);
    rep.min_curvature = rep.min_curvature ? std::min(*rep.min_curvature, c) : c;
  };

  // Without a cone block the critical set is a subspace: exact answer.
  if (!cone.has_cone_block()) {
    const Mat basis = cone.null_basis();
    if (basis.cols() > 0) {
      const Mat reduced = basis.transpose() * curv * basis;
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (reduced + reduced.transpose()));
      consider(basis * es.eigenvectors().col(0));
    }
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::optional<Vec> best;
  double best_c = std::numeric_limits<double>::infinity();
  for (int s = 0; s < num_dirs; ++s) {
    Vec d(n);
    for (Index i = 0; i < n; ++i) d(i) = gauss(rng);
    ++rep.sampled;
    const auto pulled = cone.pull(d);
    if (!pulled || !cone.accepts(*pulled)) continue;
    consider(*pulled);
    const double c = pulled->dot(curv * *pulled);
    if (c < best_c) {
      best_c = c;
      best = *pulled;
    }
  }

  // Projected descent on the Rayleigh quotient from the best sample.
  if (best) {
    const double step = 0.5 / std::max(1.0, curv.cwiseAbs().rowwise().sum().maxCoeff());
    Vec d = *best;
    for (int it = 0; it < 500; ++it) {
      const Vec grad = curv * d - d.dot(curv * d) * d;
      const auto next = cone.pull(d - step * grad);
      if (!next || !cone.accepts(*next)) break;
      if (next->dot(curv * *next) > d.dot(curv * d)) break;
      d = *next;
    }
    consider(d);
  }
  return rep;
}

KktPerturbation subproblem_perturbation(const StabilizedSubproblem& sp, const SubproblemPoint& w) {
  KktPerturbation u;
  u.r = sp.H * w.xi;
  u.s = sp.m() > 0 ? Vec(sp.Jg.transpose() * w.xi + sp.sigma * (w.zeta - sp.yref)) : Vec(0);
  u.T = combine(sp.Aops, w.xi) + (w.Sigma - sp.Zref) * sp.sigma;
  return u;
}

double perturbed_kkt_closure(const NsdpProblem& prob, const PrimalDualPoint& v,
                             const StabilizedSubproblem& sp, const SubproblemPoint& w) {
  const PrimalDualPoint shifted{v.x, w.zeta, w.Sigma};
  return perturbed_kkt_residual(prob, shifted, subproblem_perturbation(sp, w));
}

}  // namespace nsdp
