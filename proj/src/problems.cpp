#include "nsdp/problems.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace nsdp {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

const std::set<std::string, std::less<>> kKnownTags = {"srcq", "sosc", "strict_complementarity",
                                                       "beta_nonempty"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

bool ProblemSpec::has_tag(std::string_view tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

void ProblemSpec::validate() const {
  const std::string where = "problem '" + id + "': ";
  if (id.empty()) throw ParseError("problem id must be non-empty");
  if (n < 1 || m < 0 || d < 1) throw ParseError(where + "dims require n >= 1, m >= 0, d >= 1");
  if (objective.nvars() != n) throw ParseError(where + "objective has wrong variable count");
  if (objective.degree() > kMaxObjectiveDegree)
    throw ParseError(where + "objective degree exceeds " + std::to_string(kMaxObjectiveDegree));
  if (static_cast<Index>(equalities.size()) != m)
    throw ParseError(where + "expected " + std::to_string(m) + " equality constraints, got " +
                     std::to_string(equalities.size()));
  for (std::size_t i = 0; i < equalities.size(); ++i) {
    if (equalities[i].nvars() != n)
      throw ParseError(where + "equality " + std::to_string(i) + " has wrong variable count");
    if (equalities[i].degree() > kMaxEqualityDegree)
      throw ParseError(where + "equality " + std::to_string(i) + " degree exceeds " +
                       std::to_string(kMaxEqualityDegree));
  }
  std::set<std::pair<Index, Index>> seen;
  for (const auto& e : matrix) {
    const std::string at = "matrix entry (" + std::to_string(e.row) + "," + std::to_string(e.col) + ")";
    if (e.row < 0 || e.col < 0 || e.row >= d || e.col >= d)
      throw ParseError(where + at + " is outside the " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
    if (e.row > e.col) throw ParseError(where + at + " must be stored with row <= col");
    if (!seen.insert({e.row, e.col}).second) throw ParseError(where + at + " defined twice");
    if (e.poly.nvars() != n) throw ParseError(where + at + " has wrong variable count");
    if (e.poly.degree() > kMaxMatrixDegree)
      throw ParseError(where + at + " degree exceeds " + std::to_string(kMaxMatrixDegree));
  }
  for (const auto& t : tags)
    if (!kKnownTags.count(t)) throw ParseError(where + "unknown tag '" + t + "'");
  if (reference) {
    const auto& v = reference->v;
    if (v.x.size() != n || v.y.size() != m || v.Z.dim() != d)
      throw ParseError(where + "reference point has wrong dimensions");
    if (!(reference->tol > 0.0)) throw ParseError(where + "reference tol must be positive");
  }
  if (blocks && blocks->alpha + blocks->beta + blocks->gamma != d)
    throw ParseError(where + "declared blocks must add up to d");
}

// ---------------------------------------------------------------------------

PolynomialProblem::PolynomialProblem(ProblemSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

double PolynomialProblem::f(const Vec& x) const { return spec_.objective.eval(x); }

Vec PolynomialProblem::grad_f(const Vec& x) const { return spec_.objective.grad(x); }

Mat PolynomialProblem::hess_f(const Vec& x) const { return spec_.objective.hess(x); }

Vec PolynomialProblem::g(const Vec& x) const {
  Vec out(spec_.m);
  for (Index i = 0; i < spec_.m; ++i) out(i) = spec_.equalities[static_cast<std::size_t>(i)].eval(x);
  return out;
}

Mat PolynomialProblem::jac_g(const Vec& x) const {
  Mat out(spec_.n, spec_.m);
  for (Index i = 0; i < spec_.m; ++i) out.col(i) = spec_.equalities[static_cast<std::size_t>(i)].grad(x);
  return out;
}

Mat PolynomialProblem::hess_g(const Vec& x, const Vec& y) const {
  if (y.size() != spec_.m) throw ContractError("hess_g: multiplier has wrong length");
  Mat out = Mat::Zero(spec_.n, spec_.n);
  for (Index i = 0; i < spec_.m; ++i) {
    if (y(i) != 0.0) out += y(i) * spec_.equalities[static_cast<std::size_t>(i)].hess(x);
  }
  return out;
}

SymMat PolynomialProblem::X(const Vec& x) const {
  Mat out = Mat::Zero(spec_.d, spec_.d);
  for (const auto& e : spec_.matrix) {
    const double v = e.poly.eval(x);
    out(e.row, e.col) = v;
    out(e.col, e.row) = v;
  }
  return SymMat(out);
}

SymMat PolynomialProblem::A(const Vec& x, Index j) const {
  if (j < 0 || j >= spec_.n) throw ContractError("A: index out of range");
  Mat out = Mat::Zero(spec_.d, spec_.d);
  for (const auto& e : spec_.matrix) {
    const double v = e.poly.grad(x)(j);
    out(e.row, e.col) = v;
    out(e.col, e.row) = v;
  }
  return SymMat(out);
}

Mat PolynomialProblem::hess_X_contract(const Vec& x, const SymMat& Z) const {
  if (Z.dim() != spec_.d) throw ContractError("hess_X_contract: multiplier has wrong size");
  Mat out = Mat::Zero(spec_.n, spec_.n);
  for (const auto& e : spec_.matrix) {
    const double w = e.row == e.col ? Z(e.row, e.col) : 2.0 * Z(e.row, e.col);
    if (w != 0.0) out += w * e.poly.hess(x);
  }
  return out;
}

// ---------------------------------------------------------------------------

void verify_reference(const ProblemSpec& spec) {
  if (!spec.reference) return;
  const PolynomialProblem prob(spec);
  const double res = kkt_residual(prob, spec.reference->v);
  if (!(res <= spec.reference->tol)) {
    throw VerificationError("problem '" + spec.id + "': reference point has KKT residual " +
                                num(res) + " above the stated tolerance " + num(spec.reference->tol),
                            res);
  }
}

namespace {

Monomial mono(std::vector<int> exp, double coef) { return {std::move(exp), coef}; }

SymMat sym(std::initializer_list<std::initializer_list<double>> rows) {
  const Index d = static_cast<Index>(rows.size());
  Mat out(d, d);
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) out(i, j++) = v;
    ++i;
  }
  return SymMat(out);
}

Vec vec(std::initializer_list<double> vals) {
  Vec out(static_cast<Index>(vals.size()));
  Index i = 0;
  for (double v : vals) out(i++) = v;
  return out;
}

// min x^2  s.t.  x PSD (1x1). x* = 0, Z* = 0: M* = 0 so beta is the whole
// spectrum.
ProblemSpec scalar_degenerate() {
  ProblemSpec s;
  s.id = "scalar-degenerate";
  s.description = "min x^2 s.t. [x] PSD; X(x*) = Z* = 0";
  s.n = 1;
  s.m = 0;
  s.d = 1;
  s.objective = Polynomial(1, {mono({2}, 1.0)});
  s.matrix = {{0, 0, Polynomial(1, {mono({1}, 1.0)})}};
  s.reference = ReferencePoint{{vec({0.0}), Vec(0), sym({{0.0}})}, 1e-10};
  s.tags = {"srcq", "sosc", "beta_nonempty"};
  s.blocks = BlockSizes{0, 1, 0};
  return s;
}

// min x1 + |x|^2 / 2  s.t.  x1 + x2 = 1, diag(x1, x2) PSD.
// x* = (0, 1), y* = 1, Z* = 0. X(x*) - Z* = diag(0, 1) has a zero
// eigenvalue, so strict complementarity fails although the multiplier is
// unique.
ProblemSpec nondegenerate_2x2() {
  ProblemSpec s;
  s.id = "nondegenerate-2x2";
  s.description = "min x1 + |x|^2/2 s.t. x1 + x2 = 1, diag(x1, x2) PSD";
  s.n = 2;
  s.m = 1;
  s.d = 2;
  s.objective = Polynomial(2, {mono({1, 0}, 1.0), mono({2, 0}, 0.5), mono({0, 2}, 0.5)});
  s.equalities = {Polynomial(2, {mono({1, 0}, 1.0), mono({0, 1}, 1.0), mono({0, 0}, -1.0)})};
  s.matrix = {{0, 0, Polynomial(2, {mono({1, 0}, 1.0)})}, {1, 1, Polynomial(2, {mono({0, 1}, 1.0)})}};
  s.reference = ReferencePoint{{vec({0.0, 1.0}), vec({1.0}), sym({{0.0, 0.0}, {0.0, 0.0}})}, 1e-10};
  s.tags = {"srcq", "sosc", "beta_nonempty"};
  s.blocks = BlockSizes{1, 1, 0};
  return s;
}

// X(x) = [[x1, x2], [x2, x3]] (bijective A, so the multiplier is unique),
// f = |x|^2/2 + x3 + x1^4/4 + x1^2 x3 / 2.
// x* = 0, Z* = diag(0, 1): X(x*) and Z* share the zero eigenvector e1.
ProblemSpec beta_2x2() {
  ProblemSpec s;
  s.id = "beta-2x2";
  s.description = "X(x) = [[x1, x2], [x2, x3]], quartic objective, X(x*) = 0, Z* = diag(0, 1)";
  s.n = 3;
  s.m = 0;
  s.d = 2;
  s.objective = Polynomial(3, {mono({2, 0, 0}, 0.5), mono({0, 2, 0}, 0.5), mono({0, 0, 2}, 0.5),
                               mono({0, 0, 1}, 1.0), mono({4, 0, 0}, 0.25), mono({2, 0, 1}, 0.5)});
  s.matrix = {{0, 0, Polynomial(3, {mono({1, 0, 0}, 1.0)})},
              {0, 1, Polynomial(3, {mono({0, 1, 0}, 1.0)})},
              {1, 1, Polynomial(3, {mono({0, 0, 1}, 1.0)})}};
  s.reference = ReferencePoint{{vec({0.0, 0.0, 0.0}), Vec(0), sym({{0.0, 0.0}, {0.0, 1.0}})}, 1e-10};
  s.tags = {"srcq", "sosc", "beta_nonempty"};
  s.blocks = BlockSizes{0, 1, 1};
  return s;
}

// Convex quadratic objective, one affine equality, affine 2x2 X.
// x* = (0, 1, 1), y* = 1, Z* = [[1, -1], [-1, 1]]; X(x*) - Z* has
// eigenvalues +-2.
ProblemSpec affine_qsdp() {
  ProblemSpec s;
  s.id = "affine-qsdp";
  s.description = "convex quadratic f, affine g and X, strictly complementary solution";
  s.n = 3;
  s.m = 1;
  s.d = 2;
  // 1/2 x^T Q x + q^T x,  Q = [[2, .5, 0], [.5, 2, 0], [0, 0, 1]],  q = (1.5, -3, 1)
  s.objective = Polynomial(3, {mono({2, 0, 0}, 1.0), mono({1, 1, 0}, 0.5), mono({0, 2, 0}, 1.0),
                               mono({0, 0, 2}, 0.5), mono({1, 0, 0}, 1.5), mono({0, 1, 0}, -3.0),
                               mono({0, 0, 1}, 1.0)});
  s.equalities = {Polynomial(3, {mono({1, 0, 0}, 1.0), mono({0, 1, 0}, 1.0), mono({0, 0, 1}, 1.0),
                                 mono({0, 0, 0}, -2.0)})};
  s.matrix = {{0, 0, Polynomial(3, {mono({0, 0, 0}, 1.0), mono({1, 0, 0}, 1.0)})},
              {0, 1, Polynomial(3, {mono({0, 1, 0}, 1.0)})},
              {1, 1, Polynomial(3, {mono({0, 0, 1}, 1.0)})}};
  s.reference =
      ReferencePoint{{vec({0.0, 1.0, 1.0}), vec({1.0}), sym({{1.0, -1.0}, {-1.0, 1.0}})}, 1e-10};
  s.tags = {"srcq", "sosc", "strict_complementarity"};
  s.blocks = BlockSizes{1, 0, 1};
  return s;
}

// 3x3 X with quadratic entries:
//   X = [[1 + x1^2, x1 x2,      x4/2          ],
//        [.,        x3 + x2^2,  x4 + x1 x3    ],
//        [.,        .,          x2 + x3 - x4^2]]
// g = x1 + x2^2/2 + x4 - 1,  f = |x|^2/2 + c^T x + x2^2 x4, c = (-.5, 1, 1, .5).
// x* = (1, 0, 0, 0), y* = 1/2, Z* = e3 e3^T; X(x*) - Z* = diag(2, 0, -1).
ProblemSpec nonlinear_3x3() {
  ProblemSpec s;
  s.id = "nonlinear-3x3";
  s.description = "3x3 matrix constraint with quadratic entries and a curved equality";
  s.n = 4;
  s.m = 1;
  s.d = 3;
  s.objective = Polynomial(4, {mono({2, 0, 0, 0}, 0.5), mono({0, 2, 0, 0}, 0.5), mono({0, 0, 2, 0}, 0.5),
                               mono({0, 0, 0, 2}, 0.5), mono({1, 0, 0, 0}, -0.5), mono({0, 1, 0, 0}, 1.0),
                               mono({0, 0, 1, 0}, 1.0), mono({0, 0, 0, 1}, 0.5), mono({0, 2, 0, 1}, 1.0)});
  s.equalities = {Polynomial(4, {mono({1, 0, 0, 0}, 1.0), mono({0, 2, 0, 0}, 0.5), mono({0, 0, 0, 1}, 1.0),
                                 mono({0, 0, 0, 0}, -1.0)})};
  s.matrix = {{0, 0, Polynomial(4, {mono({0, 0, 0, 0}, 1.0), mono({2, 0, 0, 0}, 1.0)})},
              {0, 1, Polynomial(4, {mono({1, 1, 0, 0}, 1.0)})},
              {0, 2, Polynomial(4, {mono({0, 0, 0, 1}, 0.5)})},
              {1, 1, Polynomial(4, {mono({0, 0, 1, 0}, 1.0), mono({0, 2, 0, 0}, 1.0)})},
              {1, 2, Polynomial(4, {mono({0, 0, 0, 1}, 1.0), mono({1, 0, 1, 0}, 1.0)})},
              {2, 2, Polynomial(4, {mono({0, 1, 0, 0}, 1.0), mono({0, 0, 1, 0}, 1.0), mono({0, 0, 0, 2}, -1.0)})}};
  s.reference = ReferencePoint{
      {vec({1.0, 0.0, 0.0, 0.0}), vec({0.5}), sym({{0, 0, 0}, {0, 0, 0}, {0, 0, 1.0}})}, 1e-10};
  s.tags = {"srcq", "sosc", "beta_nonempty"};
  s.blocks = BlockSizes{1, 1, 1};
  return s;
}

std::vector<ProblemSpec> build_registry() {
  std::vector<ProblemSpec> all = {scalar_degenerate(), nondegenerate_2x2(), beta_2x2(), affine_qsdp(),
                                  nonlinear_3x3()};
  for (const auto& s : all) {
    s.validate();
    verify_reference(s);
  }
  return all;
}

}  // namespace

const std::vector<ProblemSpec>& registry() {
  static const std::vector<ProblemSpec> all = build_registry();
  return all;
}

std::vector<std::string> registry_ids() {
  std::vector<std::string> ids;
  for (const auto& s : registry()) ids.push_back(s.id);
  return ids;
}

const ProblemSpec* find_problem(std::string_view id) {
  for (const auto& s : registry())
    if (s.id == id) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Problem files

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw ParseError(source_ + ": at " + (ptr.empty() ? "/" : ptr) + ": " + msg);
  }

  const json& field(const json& obj, const std::string& ptr, const char* key) const {
    if (!obj.contains(key)) fail(ptr, std::string("missing required field '") + key + "'");
    return obj.at(key);
  }

  void expect_object(const json& j, const std::string& ptr) const {
    if (!j.is_object()) fail(ptr, "expected an object");
  }

  void expect_array(const json& j, const std::string& ptr) const {
    if (!j.is_array()) fail(ptr, "expected an array");
  }

  long long integer(const json& j, const std::string& ptr) const {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    return j.get<long long>();
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(ptr, "number is not finite");
    return v;
  }

  std::string string(const json& j, const std::string& ptr) const {
    if (!j.is_string()) fail(ptr, "expected a string");
    return j.get<std::string>();
  }

  Polynomial polynomial(const json& j, const std::string& ptr, Index n, int max_degree) const {
    expect_array(j, ptr);
    std::vector<Monomial> terms;
    std::set<std::vector<int>> seen;
    for (std::size_t t = 0; t < j.size(); ++t) {
      const std::string tp = ptr + "/" + std::to_string(t);
      expect_object(j[t], tp);
      const json& e = field(j[t], tp, "exp");
      expect_array(e, tp + "/exp");
      if (static_cast<Index>(e.size()) != n)
        fail(tp + "/exp", "expected " + std::to_string(n) + " exponents, got " + std::to_string(e.size()));
      Monomial mnl;
      int deg = 0;
      for (std::size_t i = 0; i < e.size(); ++i) {
        const long long p = integer(e[i], tp + "/exp/" + std::to_string(i));
        if (p < 0) fail(tp + "/exp/" + std::to_string(i), "exponent must be nonnegative");
        if (p > max_degree) fail(tp + "/exp/" + std::to_string(i), "degree exceeds " + std::to_string(max_degree));
        mnl.exp.push_back(static_cast<int>(p));
        deg += static_cast<int>(p);
      }
      if (deg > max_degree)
        fail(tp, "monomial degree " + std::to_string(deg) + " exceeds the cap " + std::to_string(max_degree));
      if (!seen.insert(mnl.exp).second) fail(tp, "exponent tuple repeated within one polynomial");
      mnl.coef = number(field(j[t], tp, "coef"), tp + "/coef");
      terms.push_back(std::move(mnl));
    }
    return Polynomial(n, std::move(terms));
  }

  Vec vector(const json& j, const std::string& ptr, Index len) const {
    expect_array(j, ptr);
    if (static_cast<Index>(j.size()) != len)
      fail(ptr, "expected " + std::to_string(len) + " entries, got " + std::to_string(j.size()));
    Vec out(len);
    for (Index i = 0; i < len; ++i) out(i) = number(j[static_cast<std::size_t>(i)], ptr + "/" + std::to_string(i));
    return out;
  }

  SymMat matrix(const json& j, const std::string& ptr, Index d) const {
    expect_array(j, ptr);
    if (static_cast<Index>(j.size()) != d) fail(ptr, "expected " + std::to_string(d) + " rows");
    Mat out(d, d);
    for (Index r = 0; r < d; ++r) {
      const std::string rp = ptr + "/" + std::to_string(r);
      out.row(r) = vector(j[static_cast<std::size_t>(r)], rp, d).transpose();
    }
    for (Index r = 0; r < d; ++r)
      for (Index c = r + 1; c < d; ++c)
        if (out(r, c) != out(c, r))
          fail(ptr, "matrix is not symmetric at (" + std::to_string(r) + "," + std::to_string(c) + ")");
    return SymMat(out);
  }

 private:
  std::string source_;
};

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

ojson terms_json(const Polynomial& p) {
  ojson arr = ojson::array();
  for (const auto& t : p.terms()) {
    ojson o;
    o["exp"] = t.exp;
    o["coef"] = t.coef;
    arr.push_back(std::move(o));
  }
  return arr;
}

}  // namespace

ProblemSpec parse_problem(std::string_view text, std::string_view source) {
  const Reader rd{std::string(source)};
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": malformed JSON: " << e.what();
    throw ParseError(os.str());
  }
  rd.expect_object(doc, "");

  const long long version = rd.integer(rd.field(doc, "", "format_version"), "/format_version");
  if (version != 1) rd.fail("/format_version", "unsupported format version " + std::to_string(version));

  ProblemSpec s;
  s.id = rd.string(rd.field(doc, "", "id"), "/id");
  if (s.id.empty()) rd.fail("/id", "id must be non-empty");
  if (doc.contains("description")) s.description = rd.string(doc["description"], "/description");

  const json& dims = rd.field(doc, "", "dims");
  rd.expect_object(dims, "/dims");
  const long long n = rd.integer(rd.field(dims, "/dims", "n"), "/dims/n");
  const long long m = rd.integer(rd.field(dims, "/dims", "m"), "/dims/m");
  const long long d = rd.integer(rd.field(dims, "/dims", "d"), "/dims/d");
  if (n < 1) rd.fail("/dims/n", "n must be at least 1");
  if (m < 0) rd.fail("/dims/m", "m must be nonnegative");
  if (d < 1) rd.fail("/dims/d", "d must be at least 1");
  s.n = n;
  s.m = m;
  s.d = d;

  s.objective = rd.polynomial(rd.field(doc, "", "objective"), "/objective", s.n, kMaxObjectiveDegree);

  if (doc.contains("equalities")) {
    const json& eqs = doc["equalities"];
    rd.expect_array(eqs, "/equalities");
    for (std::size_t i = 0; i < eqs.size(); ++i)
      s.equalities.push_back(rd.polynomial(eqs[i], "/equalities/" + std::to_string(i), s.n, kMaxEqualityDegree));
  }
  if (static_cast<Index>(s.equalities.size()) != s.m)
    rd.fail("/equalities", "dims.m = " + std::to_string(s.m) + " but " + std::to_string(s.equalities.size()) +
                               " equality constraints are listed");

  if (doc.contains("matrix")) {
    const json& entries = doc["matrix"];
    rd.expect_array(entries, "/matrix");
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const std::string ep = "/matrix/" + std::to_string(k);
      rd.expect_object(entries[k], ep);
      const long long r = rd.integer(rd.field(entries[k], ep, "row"), ep + "/row");
      const long long c = rd.integer(rd.field(entries[k], ep, "col"), ep + "/col");
      if (r < 0 || r >= d || c < 0 || c >= d)
        rd.fail(ep, "entry (" + std::to_string(r) + "," + std::to_string(c) + ") is outside the matrix");
      Polynomial p = rd.polynomial(rd.field(entries[k], ep, "terms"), ep + "/terms", s.n, kMaxMatrixDegree);
      const Index lo = std::min<Index>(r, c), hi = std::max<Index>(r, c);
      auto prev = std::find_if(s.matrix.begin(), s.matrix.end(),
                               [&](const MatrixEntry& e) { return e.row == lo && e.col == hi; });
      if (prev != s.matrix.end()) {
        if (r != c && !(prev->poly == p))
          rd.fail(ep, "asymmetric matrix table: entries (" + std::to_string(c) + "," + std::to_string(r) +
                          ") and (" + std::to_string(r) + "," + std::to_string(c) + ") differ");
        rd.fail(ep, "entry (" + std::to_string(r) + "," + std::to_string(c) + ") defined twice");
      }
      s.matrix.push_back({lo, hi, std::move(p)});
    }
  }

  if (doc.contains("tags")) {
    const json& tags = doc["tags"];
    rd.expect_array(tags, "/tags");
    for (std::size_t i = 0; i < tags.size(); ++i) {
      std::string t = rd.string(tags[i], "/tags/" + std::to_string(i));
      if (!kKnownTags.count(t)) rd.fail("/tags/" + std::to_string(i), "unknown tag '" + t + "'");
      if (!s.has_tag(t)) s.tags.push_back(std::move(t));
    }
  }

  if (doc.contains("blocks")) {
    const json& b = doc["blocks"];
    rd.expect_object(b, "/blocks");
    BlockSizes bs;
    bs.alpha = rd.integer(rd.field(b, "/blocks", "alpha"), "/blocks/alpha");
    bs.beta = rd.integer(rd.field(b, "/blocks", "beta"), "/blocks/beta");
    bs.gamma = rd.integer(rd.field(b, "/blocks", "gamma"), "/blocks/gamma");
    if (bs.alpha < 0 || bs.beta < 0 || bs.gamma < 0 || bs.alpha + bs.beta + bs.gamma != s.d)
      rd.fail("/blocks", "block sizes must be nonnegative and add up to d");
    s.blocks = bs;
  }

  if (doc.contains("reference")) {
    const json& ref = doc["reference"];
    rd.expect_object(ref, "/reference");
    ReferencePoint rp;
    rp.v.x = rd.vector(rd.field(ref, "/reference", "x"), "/reference/x", s.n);
    if (ref.contains("y"))
      rp.v.y = rd.vector(ref["y"], "/reference/y", s.m);
    else if (s.m == 0)
      rp.v.y = Vec(0);
    else
      rd.fail("/reference", "missing required field 'y'");
    rp.v.Z = rd.matrix(rd.field(ref, "/reference", "Z"), "/reference/Z", s.d);
    if (ref.contains("tol")) {
      rp.tol = rd.number(ref["tol"], "/reference/tol");
      if (!(rp.tol > 0.0)) rd.fail("/reference/tol", "tolerance must be positive");
    }
    s.reference = std::move(rp);
  }

  try {
    s.validate();
  } catch (const ParseError& e) {
    throw ParseError(std::string(source) + ": " + e.what());
  }
  verify_reference(s);
  return s;
}

ProblemSpec load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem(buf.str(), path);
}

std::string to_json(const ProblemSpec& spec) {
  ojson doc;
  doc["format_version"] = 1;
  doc["id"] = spec.id;
  if (!spec.description.empty()) doc["description"] = spec.description;
  doc["dims"] = {{"n", spec.n}, {"m", spec.m}, {"d", spec.d}};
  doc["objective"] = terms_json(spec.objective);
  ojson eqs = ojson::array();
  for (const auto& g : spec.equalities) eqs.push_back(terms_json(g));
  doc["equalities"] = std::move(eqs);
  ojson entries = ojson::array();
  for (const auto& e : spec.matrix) {
    ojson o;
    o["row"] = e.row;
    o["col"] = e.col;
    o["terms"] = terms_json(e.poly);
    entries.push_back(std::move(o));
  }
  doc["matrix"] = std::move(entries);
  if (spec.reference) {
    const auto& v = spec.reference->v;
    ojson ref;
    ref["x"] = std::vector<double>(v.x.data(), v.x.data() + v.x.size());
    ref["y"] = std::vector<double>(v.y.data(), v.y.data() + v.y.size());
    ojson z = ojson::array();
    for (Index r = 0; r < v.Z.dim(); ++r) {
      std::vector<double> row;
      for (Index c = 0; c < v.Z.dim(); ++c) row.push_back(v.Z(r, c));
      z.push_back(row);
    }
    ref["Z"] = std::move(z);
    ref["tol"] = spec.reference->tol;
    doc["reference"] = std::move(ref);
  }
  doc["tags"] = spec.tags;
  if (spec.blocks)
    doc["blocks"] = {{"alpha", spec.blocks->alpha}, {"beta", spec.blocks->beta}, {"gamma", spec.blocks->gamma}};
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Derivative check

namespace {

constexpr int kCheckPoints = 10;

class ErrorTracker {
 public:
  explicit ErrorTracker(DerivativeCheckReport& rep) : rep_(rep) {}

  void compare(const Mat& analytic, const Mat& fd, const std::string& what, int point) {
    for (Index i = 0; i < analytic.rows(); ++i) {
      for (Index j = 0; j < analytic.cols(); ++j) {
        const double err = std::abs(analytic(i, j) - fd(i, j)) / (1.0 + std::abs(fd(i, j)));
        if (std::isnan(err) || err > rep_.max_rel_error) {
          rep_.max_rel_error = std::isnan(err) ? std::numeric_limits<double>::infinity() : err;
          std::ostringstream os;
          os << what << "[" << i;
          if (analytic.cols() > 1) os << "," << j;
          os << "] at point " << point;
          rep_.worst = os.str();
        }
      }
    }
  }

 private:
  DerivativeCheckReport& rep_;
};

template <typename F>
Mat central(const Vec& x, F&& map) {
  const Index n = x.size();
  Mat out;
  Vec xp = x;
  for (Index j = 0; j < n; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(x(j)));
    xp(j) = x(j) + h;
    const Vec up = map(xp);
    xp(j) = x(j) - h;
    const Vec um = map(xp);
    xp(j) = x(j);
    if (j == 0) out.resize(up.size(), n);
    out.col(j) = (up - um) / (2.0 * h);
  }
  return out;
}

Vec one(double v) {
  Vec out(1);
  out(0) = v;
  return out;
}

}  // namespace

DerivativeCheckReport derivative_check(const NsdpProblem& prob, std::uint64_t seed,
                                       const std::optional<Vec>& center) {
  const Index n = prob.n(), m = prob.m(), d = prob.d();
  DerivativeCheckReport rep;
  ErrorTracker track(rep);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  for (int p = 0; p < kCheckPoints; ++p) {
    Vec x(n);
    for (Index i = 0; i < n; ++i) x(i) = unif(rng);
    if (center) x += *center;
    Vec y(m);
    for (Index i = 0; i < m; ++i) y(i) = unif(rng);
    Mat zr(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) zr(i, j) = unif(rng);
    const SymMat Z(zr);

    track.compare(prob.grad_f(x), central(x, [&](const Vec& q) { return one(prob.f(q)); }).transpose(),
                  "grad_f", p);
    track.compare(prob.hess_f(x), central(x, [&](const Vec& q) { return prob.grad_f(q); }), "hess_f", p);
    if (m > 0) {
      track.compare(prob.jac_g(x).transpose(), central(x, [&](const Vec& q) { return prob.g(q); }), "jac_g^T", p);
      track.compare(prob.hess_g(x, y), central(x, [&](const Vec& q) -> Vec { return prob.jac_g(q) * y; }),
                    "hess_g", p);
    }
    for (Index j = 0; j < n; ++j) {
      Vec xp = x, xm = x;
      const double h = 1e-5 * (1.0 + std::abs(x(j)));
      xp(j) += h;
      xm(j) -= h;
      const Mat fd = (prob.X(xp).mat() - prob.X(xm).mat()) / (2.0 * h);
      track.compare(prob.A(x, j).mat(), fd, "A_" + std::to_string(j), p);
    }
    track.compare(prob.hess_X_contract(x, Z),
                  central(x, [&](const Vec& q) { return adjoint(prob.A_all(q), Z); }), "hess_X_contract", p);
    ++rep.points;
  }
  rep.passed = rep.max_rel_error <= rep.threshold;
  return rep;
}

DerivativeCheckReport derivative_check(const ProblemSpec& spec, std::uint64_t seed) {
  const PolynomialProblem prob(spec);
  std::optional<Vec> center;
  if (spec.reference) center = spec.reference->v.x;
  return derivative_check(prob, seed, center);
}

}  // namespace nsdp
