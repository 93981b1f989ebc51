#include "nsdp/symkernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nsdp {

namespace {

constexpr double kSignThreshold = 1e-12;

void require_square(const Mat& m) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "SymMat: matrix is " << m.rows() << "x" << m.cols() << ", expected square";
    throw ContractError(os.str());
  }
}

void require_same_dim(const SymMat& a, const SymMat& b, const char* what) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << what << ": dimension mismatch " << a.dim() << " vs " << b.dim();
    throw ContractError(os.str());
  }
}

}  // namespace

SymMat::SymMat(const Mat& m) {
  require_square(m);
  m_ = 0.5 * (m + m.transpose());
}

SymMat SymMat::zero(Index d) { return SymMat(Mat::Zero(d, d), Trusted{}); }

SymMat SymMat::identity(Index d) { return SymMat(Mat::Identity(d, d), Trusted{}); }

SymMat SymMat::diagonal(const Vec& v) { return SymMat(Mat(v.asDiagonal()), Trusted{}); }

SymMat SymMat::operator+(const SymMat& o) const {
  require_same_dim(*this, o, "SymMat::operator+");
  return SymMat(m_ + o.m_, Trusted{});
}

SymMat SymMat::operator-(const SymMat& o) const {
  require_same_dim(*this, o, "SymMat::operator-");
  return SymMat(m_ - o.m_, Trusted{});
}

SymMat SymMat::operator-() const { return SymMat(-m_, Trusted{}); }

SymMat SymMat::operator*(double s) const { return SymMat(s * m_, Trusted{}); }

SymMat& SymMat::operator+=(const SymMat& o) {
  require_same_dim(*this, o, "SymMat::operator+=");
  m_ += o.m_;
  return *this;
}

SymMat& SymMat::operator-=(const SymMat& o) {
  require_same_dim(*this, o, "SymMat::operator-=");
  m_ -= o.m_;
  return *this;
}

double inner(const SymMat& a, const SymMat& b) {
  require_same_dim(a, b, "inner");
  return (a.mat().array() * b.mat().array()).sum();
}

Vec svec(const SymMat& a) {
  const Index d = a.dim();
  Vec v(svec_size(d));
  Index k = 0;
  for (Index i = 0; i < d; ++i) {
    v(k++) = a(i, i);
    for (Index j = i + 1; j < d; ++j) v(k++) = std::sqrt(2.0) * a(i, j);
  }
  return v;
}

SymMat smat(const Vec& v, Index d) {
  if (v.size() != svec_size(d)) throw ContractError("smat: vector length does not match d(d+1)/2");
  Mat m(d, d);
  Index k = 0;
  for (Index i = 0; i < d; ++i) {
    m(i, i) = v(k++);
    for (Index j = i + 1; j < d; ++j) {
      m(i, j) = v(k++) / std::sqrt(2.0);
      m(j, i) = m(i, j);
    }
  }
  return SymMat(m);
}

SymMat EigenDecomp::reassemble() const {
  return SymMat(Mat(basis * values.asDiagonal() * basis.transpose()));
}

EigenDecomp eig(const SymMat& m) {
  const Index d = m.dim();
  EigenDecomp out;
  if (d == 0) {
    out.basis = Mat(0, 0);
    out.values = Vec(0);
    return out;
  }
  if (!m.mat().allFinite()) {
    throw NumericalError("eig: input contains non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Mat> solver(m.mat());
  if (solver.info() != Eigen::Success) {
    std::ostringstream os;
    os << "eig: symmetric eigensolver did not converge (d = " << d
       << ", ||M||_F = " << m.frobenius()
       << ", max |m_ij| = " << m.mat().cwiseAbs().maxCoeff() << ")";
    throw NumericalError(os.str());
  }
  // Eigen returns ascending order; flip to descending.
  out.values = solver.eigenvalues().reverse();
  out.basis = solver.eigenvectors().rowwise().reverse();
  for (Index c = 0; c < d; ++c) {
    for (Index r = 0; r < d; ++r) {
      const double p = out.basis(r, c);
      if (std::abs(p) > kSignThreshold) {
        if (p < 0) out.basis.col(c) *= -1.0;
        break;
      }
    }
  }
  return out;
}

double default_eig_tol(const SymMat& m) { return 1e-8 * (1.0 + m.frobenius()); }

SymMat proj_psd(const EigenDecomp& dec) {
  const Vec clamped = dec.values.cwiseMax(0.0);
  return SymMat(Mat(dec.basis * clamped.asDiagonal() * dec.basis.transpose()));
}

SymMat proj_psd(const SymMat& m) { return proj_psd(eig(m)); }

IndexPartition partition(const EigenDecomp& dec, double tol) {
  if (tol < 0) throw ContractError("partition: tolerance must be nonnegative");
  IndexPartition part;
  part.tol = tol;
  for (Index i = 0; i < dec.dim(); ++i) {
    const double l = dec.values(i);
    if (l > tol) {
      part.alpha.push_back(i);
    } else if (l < -tol) {
      part.gamma.push_back(i);
    } else {
      part.beta.push_back(i);
    }
    const double a = std::abs(l);
    if (a > tol && a <= 10.0 * tol) part.fragile = true;
  }
  return part;
}

SymMat pinv(const SymMat& m, double tol) {
  const EigenDecomp dec = eig(m);
  Vec inv(dec.dim());
  for (Index i = 0; i < dec.dim(); ++i) {
    const double l = dec.values(i);
    inv(i) = std::abs(l) > tol ? 1.0 / l : 0.0;
  }
  return SymMat(Mat(dec.basis * inv.asDiagonal() * dec.basis.transpose()));
}

Mat select_columns(const Mat& basis, const std::vector<Index>& idx) {
  Mat out(basis.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = basis.col(idx[k]);
  return out;
}

double tangent_cone_residual(const EigenDecomp& xdec, const IndexPartition& part,
                             const SymMat& m) {
  if (m.dim() != xdec.dim()) throw ContractError("tangent_cone_residual: dimension mismatch");
  std::vector<Index> idx = part.beta;
  idx.insert(idx.end(), part.gamma.begin(), part.gamma.end());
  if (idx.empty()) return 0.0;
  const Mat pbg = select_columns(xdec.basis, idx);
  const Mat block = pbg.transpose() * m.mat() * pbg;
  Eigen::SelfAdjointEigenSolver<Mat> solver(0.5 * (block + block.transpose()),
                                            Eigen::EigenvaluesOnly);
  return std::max(0.0, -solver.eigenvalues()(0));
}

// ---------------------------------------------------------------------------

namespace {

enum class Block { alpha, beta, gamma };

}  // namespace

ProjectionDerivative::ProjectionDerivative(const SymMat& m, double tol)
    : dec_(eig(m)), part_(partition(dec_, tol)) {
  const Index d = dec_.dim();
  std::vector<Block> kind(static_cast<std::size_t>(d));
  for (Index i : part_.alpha) kind[static_cast<std::size_t>(i)] = Block::alpha;
  for (Index i : part_.beta) kind[static_cast<std::size_t>(i)] = Block::beta;
  for (Index i : part_.gamma) kind[static_cast<std::size_t>(i)] = Block::gamma;

  weights_ = Mat::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      const Block ki = kind[static_cast<std::size_t>(i)];
      const Block kj = kind[static_cast<std::size_t>(j)];
      double u = 0.0;
      if (ki == Block::gamma || kj == Block::gamma) {
        if (ki == Block::alpha || kj == Block::alpha) {
          const double li = dec_.values(i);
          const double lj = dec_.values(j);
          u = (std::max(li, 0.0) + std::max(lj, 0.0)) / (std::abs(li) + std::abs(lj));
        }
      } else if (ki == Block::alpha || kj == Block::alpha) {
        u = 1.0;
      }
      // beta/beta stays 0 here; directional() fills it by projection.
      weights_(i, j) = u;
    }
  }
}

SymMat ProjectionDerivative::assemble(const Mat& rotated, bool project_beta) const {
  Mat block = weights_.cwiseProduct(rotated);
  if (project_beta && !part_.beta.empty()) {
    const auto nb = static_cast<Index>(part_.beta.size());
    Mat nbb(nb, nb);
    for (Index a = 0; a < nb; ++a)
      for (Index b = 0; b < nb; ++b)
        nbb(a, b) = rotated(part_.beta[static_cast<std::size_t>(a)],
                            part_.beta[static_cast<std::size_t>(b)]);
    const SymMat pbb = proj_psd(SymMat(nbb));
    for (Index a = 0; a < nb; ++a)
      for (Index b = 0; b < nb; ++b)
        block(part_.beta[static_cast<std::size_t>(a)], part_.beta[static_cast<std::size_t>(b)]) =
            pbb(a, b);
  }
  return SymMat(Mat(dec_.basis * block * dec_.basis.transpose()));
}

SymMat ProjectionDerivative::directional(const SymMat& q) const {
  if (q.dim() != dec_.dim()) throw ContractError("ProjectionDerivative: dimension mismatch");
  const Mat rotated = dec_.basis.transpose() * q.mat() * dec_.basis;
  return assemble(rotated, true);
}

SymMat ProjectionDerivative::jacobian_element(const SymMat& q) const {
  if (q.dim() != dec_.dim()) throw ContractError("ProjectionDerivative: dimension mismatch");
  const Mat rotated = dec_.basis.transpose() * q.mat() * dec_.basis;
  return assemble(rotated, false);
}

SymMat proj_psd_dirderiv(const SymMat& m, const SymMat& q, double tol) {
  if (m.dim() != q.dim()) throw ContractError("proj_psd_dirderiv: dimension mismatch");
  if (q.is_zero()) return SymMat::zero(m.dim());
  return ProjectionDerivative(m, tol).directional(q);
}

}  // namespace nsdp
