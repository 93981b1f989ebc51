#pragma once

// Sparse multivariate polynomials with exact evaluation and closed-form
// first and second derivatives.

#include "nsdp/symkernel.hpp"

#include <vector>

namespace nsdp {

struct Monomial {
  std::vector<int> exp;
  double coef = 0.0;
};

/// Sum of monomials in a fixed number of variables. Monomials are evaluated
/// by repeated multiplication, so integer coefficients at integer points
/// give exact results while they fit in a double.
class Polynomial {
 public:
  Polynomial() = default;
  /// Throws ContractError when an exponent list has the wrong length, an
  /// exponent is negative, or a coefficient is not finite.
  Polynomial(Index nvars, std::vector<Monomial> terms);

  static Polynomial zero(Index nvars) { return Polynomial(nvars, {}); }

  Index nvars() const { return nvars_; }
  int degree() const;
  bool empty() const { return terms_.empty(); }
  const std::vector<Monomial>& terms() const { return terms_; }

  double eval(const Vec& x) const;
  Vec grad(const Vec& x) const;
  Mat hess(const Vec& x) const;

 private:
  Index nvars_ = 0;
  std::vector<Monomial> terms_;
};

bool operator==(const Monomial& a, const Monomial& b);
bool operator==(const Polynomial& a, const Polynomial& b);

}  // namespace nsdp
