#pragma once

// Dense symmetric-matrix calculus: eigendecomposition, projection onto the
// PSD cone and its directional derivative, pseudoinverse, spectral index
// partitions and tangent-cone tests.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace nsdp {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a numerical kernel cannot produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on violated preconditions (dimension mismatch, bad parameters).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense real symmetric matrix. Symmetry is exact: the general constructor
/// replaces its argument by (M + M^T) / 2, and all arithmetic below keeps
/// mirrored entries bit-identical.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(const Mat& m);

  static SymMat zero(Index d);
  static SymMat identity(Index d);
  static SymMat diagonal(const Vec& v);

  Index dim() const { return m_.rows(); }
  const Mat& mat() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  double frobenius() const { return m_.norm(); }
  double trace() const { return m_.trace(); }
  bool is_zero() const { return (m_.array() == 0.0).all(); }

  SymMat operator+(const SymMat& o) const;
  SymMat operator-(const SymMat& o) const;
  SymMat operator-() const;
  SymMat operator*(double s) const;
  friend SymMat operator*(double s, const SymMat& a) { return a * s; }
  SymMat& operator+=(const SymMat& o);
  SymMat& operator-=(const SymMat& o);

 private:
  struct Trusted {};
  SymMat(Mat m, Trusted) : m_(std::move(m)) {}
  Mat m_;
};

/// Frobenius inner product tr(A^T B).
double inner(const SymMat& a, const SymMat& b);

/// Scaled symmetric vectorization: off-diagonal entries carry a factor
/// sqrt(2) so that svec(A).dot(svec(B)) == inner(A, B). Ordering is the
/// upper triangle, row-major.
Vec svec(const SymMat& a);
SymMat smat(const Vec& v, Index d);
inline Index svec_size(Index d) { return d * (d + 1) / 2; }

/// Orthogonal eigendecomposition M = P diag(values) P^T with eigenvalues in
/// descending order and every eigenvector's first nonzero component positive.
struct EigenDecomp {
  Mat basis;
  Vec values;

  Index dim() const { return values.size(); }
  SymMat reassemble() const;
};

/// Spectral split of an eigendecomposition: alpha = {lambda > tol},
/// beta = {|lambda| <= tol}, gamma = {lambda < -tol}. Indices are 0-based
/// positions into EigenDecomp::values.
struct IndexPartition {
  std::vector<Index> alpha;
  std::vector<Index> beta;
  std::vector<Index> gamma;
  double tol = 0.0;
  /// Some eigenvalue sits in (tol, 10 tol] in magnitude, so the
  /// classification would flip under a modest change of tolerance.
  bool fragile = false;

  Index size() const {
    return static_cast<Index>(alpha.size() + beta.size() + gamma.size());
  }
};

EigenDecomp eig(const SymMat& m);

/// Default classification tolerance 1e-8 (1 + ||M||_F).
double default_eig_tol(const SymMat& m);

SymMat proj_psd(const SymMat& m);
SymMat proj_psd(const EigenDecomp& dec);

IndexPartition partition(const EigenDecomp& dec, double tol);

/// Moore-Penrose pseudoinverse; eigenvalues with |lambda| <= tol are
/// treated as zero.
SymMat pinv(const SymMat& m, double tol);

/// Columns of the basis selected by an index list.
Mat select_columns(const Mat& basis, const std::vector<Index>& idx);

/// max(0, -lambda_min([P_beta P_gamma]^T M [P_beta P_gamma])); zero exactly
/// when M lies in the tangent cone of the PSD cone at the decomposed matrix.
double tangent_cone_residual(const EigenDecomp& xdec, const IndexPartition& part,
                             const SymMat& m);

/// Derivative data of the PSD projection at a fixed matrix M, computed once
/// from M's eigendecomposition and reused for any number of directions.
///
/// In M's eigenbasis, with N = P^T Q P, the directional derivative keeps the
/// alpha/alpha and alpha/beta blocks of N, scales the alpha/gamma block
/// entrywise by u_ij = lambda_i / (lambda_i - lambda_j), projects the
/// beta/beta block onto the PSD cone, and zeroes everything else. Because
/// only blocks of N and scalar functions of the eigenvalues enter, the result
/// does not depend on the choice of basis inside a repeated eigenspace.
class ProjectionDerivative {
 public:
  ProjectionDerivative(const SymMat& m, double tol);

  /// P'(M; Q). Positively homogeneous in Q; linear when beta is empty.
  SymMat directional(const SymMat& q) const;

  /// A linear element of the generalized Jacobian: identical to
  /// directional() except that the beta/beta block is set to zero.
  SymMat jacobian_element(const SymMat& q) const;

  const EigenDecomp& decomposition() const { return dec_; }
  const IndexPartition& index_partition() const { return part_; }

 private:
  SymMat assemble(const Mat& rotated, bool project_beta) const;

  EigenDecomp dec_;
  IndexPartition part_;
  Mat weights_;
};

/// P'(M; Q) with the alpha/beta/gamma split taken at tolerance tol.
/// A zero direction returns the zero matrix without decomposing M.
SymMat proj_psd_dirderiv(const SymMat& m, const SymMat& q, double tol);

}  // namespace nsdp
