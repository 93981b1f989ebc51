#include "nsdp/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nsdp {

namespace {

double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// Product of x_i^(exp_i - shift_i) times the falling-factorial prefactors,
// with shift holding how many times each variable was differentiated.
double derivative_term(const Monomial& t, const Vec& x, const int* shift) {
  double value = t.coef;
  for (std::size_t i = 0; i < t.exp.size(); ++i) {
    const int e = t.exp[i];
    const int s = shift[i];
    if (s > e) return 0.0;
    for (int k = 0; k < s; ++k) value *= static_cast<double>(e - k);
    value *= ipow(x(static_cast<Index>(i)), e - s);
  }
  return value;
}

}  // namespace

Polynomial::Polynomial(Index nvars, std::vector<Monomial> terms)
    : nvars_(nvars), terms_(std::move(terms)) {
  if (nvars < 0) throw ContractError("Polynomial: negative variable count");
  for (const auto& t : terms_) {
    if (static_cast<Index>(t.exp.size()) != nvars)
      throw ContractError("Polynomial: exponent list length differs from variable count");
    if (std::any_of(t.exp.begin(), t.exp.end(), [](int e) { return e < 0; }))
      throw ContractError("Polynomial: negative exponent");
    if (!std::isfinite(t.coef)) throw ContractError("Polynomial: non-finite coefficient");
  }
}

int Polynomial::degree() const {
  int deg = 0;
  for (const auto& t : terms_) deg = std::max(deg, std::accumulate(t.exp.begin(), t.exp.end(), 0));
  return deg;
}

double Polynomial::eval(const Vec& x) const {
  if (x.size() != nvars_) throw ContractError("Polynomial::eval: dimension mismatch");
  double sum = 0.0;
  for (const auto& t : terms_) {
    double v = t.coef;
    for (Index i = 0; i < nvars_; ++i) v *= ipow(x(i), t.exp[static_cast<std::size_t>(i)]);
    sum += v;
  }
  return sum;
}

Vec Polynomial::grad(const Vec& x) const {
  if (x.size() != nvars_) throw ContractError("Polynomial::grad: dimension mismatch");
  Vec g = Vec::Zero(nvars_);
  std::vector<int> shift(static_cast<std::size_t>(nvars_), 0);
  for (const auto& t : terms_) {
    for (Index i = 0; i < nvars_; ++i) {
      if (t.exp[static_cast<std::size_t>(i)] == 0) continue;
      shift[static_cast<std::size_t>(i)] = 1;
      g(i) += derivative_term(t, x, shift.data());
      shift[static_cast<std::size_t>(i)] = 0;
    }
  }
  return g;
}

Mat Polynomial::hess(const Vec& x) const {
  if (x.size() != nvars_) throw ContractError("Polynomial::hess: dimension mismatch");
  Mat h = Mat::Zero(nvars_, nvars_);
  std::vector<int> shift(static_cast<std::size_t>(nvars_), 0);
  for (const auto& t : terms_) {
    for (Index i = 0; i < nvars_; ++i) {
      if (t.exp[static_cast<std::size_t>(i)] == 0) continue;
      for (Index j = i; j < nvars_; ++j) {
        if (t.exp[static_cast<std::size_t>(j)] == 0) continue;
        ++shift[static_cast<std::size_t>(i)];
        ++shift[static_cast<std::size_t>(j)];
        const double v = derivative_term(t, x, shift.data());
        --shift[static_cast<std::size_t>(i)];
        --shift[static_cast<std::size_t>(j)];
        h(i, j) += v;
        if (i != j) h(j, i) += v;
      }
    }
  }
  return h;
}

bool operator==(const Monomial& a, const Monomial& b) {
  return a.exp == b.exp && a.coef == b.coef;
}

bool operator==(const Polynomial& a, const Polynomial& b) {
  return a.nvars() == b.nvars() && a.terms() == b.terms();
}

}  // namespace nsdp
