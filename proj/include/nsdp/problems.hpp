#pragma once

// Built-in test problems with verified KKT reference points, and the JSON
// problem-file format for user-defined polynomial instances.
//
// File format (format_version 1), all indices 0-based:
//
//   {
//     "format_version": 1,
//     "id": "my-problem",
//     "description": "optional free text",
//     "dims": {"n": 2, "m": 1, "d": 2},
//     "objective": [{"exp": [2, 0], "coef": 0.5}, ...],       degree <= 4
//     "equalities": [[{"exp": [1, 1], "coef": 1}, ...], ...],  degree <= 2 each
//     "matrix": [{"row": 0, "col": 0, "terms": [...]}, ...],   degree <= 2 each
//     "reference": {"x": [...], "y": [...], "Z": [[...], ...], "tol": 1e-10},
//     "tags": ["srcq", "sosc", "strict_complementarity", "beta_nonempty"],
//     "blocks": {"alpha": 1, "beta": 1, "gamma": 0}
//   }
//
// Matrix entries not listed are zero. Each unordered pair (i, j) is stored
// once and mirrored; listing both (i, j) and (j, i) with different
// polynomials is an error. Repeated exponent tuples inside one polynomial
// are rejected. "description", "equalities", "matrix", "reference", "tags"
// and "blocks" are optional.

#include "nsdp/model.hpp"
#include "nsdp/polynomial.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nsdp {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VerificationError : public std::runtime_error {
 public:
  VerificationError(const std::string& msg, double residual)
      : std::runtime_error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct MatrixEntry {
  Index row = 0;
  Index col = 0;
  Polynomial poly;
};

struct ReferencePoint {
  PrimalDualPoint v;
  double tol = 1e-10;
};

struct BlockSizes {
  Index alpha = 0;
  Index beta = 0;
  Index gamma = 0;
};

inline constexpr int kMaxObjectiveDegree = 4;
inline constexpr int kMaxEqualityDegree = 2;
inline constexpr int kMaxMatrixDegree = 2;

struct ProblemSpec {
  std::string id;
  std::string description;
  Index n = 0;
  Index m = 0;
  Index d = 0;
  Polynomial objective;
  std::vector<Polynomial> equalities;
  /// Upper-triangular entries (row <= col).
  std::vector<MatrixEntry> matrix;
  std::optional<ReferencePoint> reference;
  std::vector<std::string> tags;
  std::optional<BlockSizes> blocks;

  bool has_tag(std::string_view tag) const;
  /// Both srcq and sosc are tagged.
  bool regular() const { return has_tag("srcq") && has_tag("sosc"); }
  /// Dimensions, degree caps, entry placement and tag names. Throws
  /// ParseError.
  void validate() const;
};

/// Evaluates a ProblemSpec with exact polynomial derivatives.
class PolynomialProblem final : public NsdpProblem {
 public:
  explicit PolynomialProblem(ProblemSpec spec);

  const ProblemSpec& spec() const { return spec_; }

  Index n() const override { return spec_.n; }
  Index m() const override { return spec_.m; }
  Index d() const override { return spec_.d; }
  double f(const Vec& x) const override;
  Vec grad_f(const Vec& x) const override;
  Mat hess_f(const Vec& x) const override;
  Vec g(const Vec& x) const override;
  Mat jac_g(const Vec& x) const override;
  Mat hess_g(const Vec& x, const Vec& y) const override;
  SymMat X(const Vec& x) const override;
  SymMat A(const Vec& x, Index j) const override;
  Mat hess_X_contract(const Vec& x, const SymMat& Z) const override;

 private:
  ProblemSpec spec_;
};

/// Throws VerificationError when sigma(v*) exceeds the stated tolerance.
/// No-op for specs without a reference point.
void verify_reference(const ProblemSpec& spec);

/// The built-in problems, each verified on first access.
const std::vector<ProblemSpec>& registry();
std::vector<std::string> registry_ids();
/// nullptr when unknown.
const ProblemSpec* find_problem(std::string_view id);

/// Parses and verifies a problem document. `source` names the input in
/// error messages.
ProblemSpec parse_problem(std::string_view text, std::string_view source = "<string>");
ProblemSpec load_problem(const std::string& path);
/// Serializes to the file format; parse_problem(to_json(s)) reproduces s.
std::string to_json(const ProblemSpec& spec);

struct DerivativeCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  double threshold = 1e-5;
  int points = 0;
  /// Location of the largest error, e.g. "grad_f[1] at point 3".
  std::string worst;
};

/// Compares every first and second derivative callback against central
/// differences of the level below at 10 random points. Relative error is
/// |analytic - fd| / (1 + |fd|).
DerivativeCheckReport derivative_check(const NsdpProblem& prob, std::uint64_t seed,
                                       const std::optional<Vec>& center = std::nullopt);
DerivativeCheckReport derivative_check(const ProblemSpec& spec, std::uint64_t seed);

}  // namespace nsdp
