#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace nh {

/// Univariate polynomial with nonnegative coefficients; coeffs[i] multiplies x^i.
class NonnegPoly {
 public:
  NonnegPoly() = default;
  explicit NonnegPoly(std::vector<double> coeffs);

  static NonnegPoly monomial(int degree, double c = 1.0);
  static NonnegPoly constant(double c) { return monomial(0, c); }

  const std::vector<double>& coeffs() const { return c_; }
  double coeff(int i) const { return i < static_cast<int>(c_.size()) ? c_[i] : 0.0; }
  /// Degree of the zero polynomial is 0 by convention.
  int degree() const { return c_.empty() ? 0 : static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }

  double operator()(double x) const;
  NonnegPoly derivative() const;
  /// Antiderivative vanishing at 0.
  NonnegPoly integral() const;

  NonnegPoly operator+(const NonnegPoly& o) const;
  NonnegPoly operator*(const NonnegPoly& o) const;
  NonnegPoly operator*(double s) const;
  /// (this ∘ inner)(x) = this(inner(x)).
  NonnegPoly compose(const NonnegPoly& inner) const;
  /// Raise every nonzero coefficient to at least 1 so that g(ab) <= g(a) g(b) for a, b >= 0.
  NonnegPoly submultiplicative() const;
  /// Coefficientwise maximum; dominates both operands on [0, inf).
  NonnegPoly max_with(const NonnegPoly& o) const;

  bool operator==(const NonnegPoly& o) const { return c_ == o.c_; }

 private:
  void trim();
  std::vector<double> c_;
};

/// Piecewise polynomial on [0, inf): pieces[k] is active on [breaks[k], breaks[k+1]).
class PiecewisePoly {
 public:
  PiecewisePoly() = default;
  PiecewisePoly(std::vector<double> breaks, std::vector<NonnegPoly> pieces);
  static PiecewisePoly single(NonnegPoly p) { return PiecewisePoly({0.0}, {std::move(p)}); }

  double operator()(double x) const;
  /// Right derivative at x.
  double derivative_at(double x) const;
  const NonnegPoly& piece_at(double x) const;
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<NonnegPoly>& pieces() const { return pieces_; }
  /// Largest jump |left limit - right value| over interior breakpoints.
  double continuity_gap() const;

 private:
  std::vector<double> breaks_;
  std::vector<NonnegPoly> pieces_;
};

/// p_a for gradient flow.
NonnegPoly build_pa_gf(const NonnegPoly& p, int M);
/// p_a for gradient descent: on [0,1) the linear term is replaced by a quadratic spline.
PiecewisePoly build_pa_gd(const NonnegPoly& p, int M);

struct PaViolation {
  double max_residual = 0.0;  ///< max over grid of x p_a'(x) + p'(x) - M p_a(x)
  double argmax = 0.0;
  int points = 0;
  /// Points where the residual exceeds roundoff, i.e. kPaRoundoff times the sum of |terms|.
  int violations = 0;
};

inline constexpr double kPaRoundoff = 1e-13;

std::vector<double> default_pa_grid();
PaViolation check_pa_inequality(const NonnegPoly& p, int M, const std::vector<double>& grid);
PaViolation check_pa_inequality_gd(const NonnegPoly& p, int M, const std::vector<double>& grid);

void to_json(nlohmann::json& j, const NonnegPoly& p);
void from_json(const nlohmann::json& j, NonnegPoly& p);

}  // namespace nh
