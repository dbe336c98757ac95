#include "nearhom/poly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nearhom/errors.hpp"

namespace nh {

NonnegPoly::NonnegPoly(std::vector<double> coeffs) : c_(std::move(coeffs)) {
  for (double c : c_) {
    require(std::isfinite(c) && c >= 0.0, ErrorCode::kInvalidArgument,
            "polynomial coefficients must be finite and nonnegative");
  }
  trim();
}

NonnegPoly NonnegPoly::monomial(int degree, double c) {
  require(degree >= 0, ErrorCode::kInvalidArgument, "negative degree");
  std::vector<double> v(degree + 1, 0.0);
  v[degree] = c;
  return NonnegPoly(std::move(v));
}

void NonnegPoly::trim() {
  while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
}

double NonnegPoly::operator()(double x) const {
  require(x >= 0.0, ErrorCode::kDomain, "polynomial envelopes are evaluated on x >= 0");
  double acc = 0.0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

NonnegPoly NonnegPoly::derivative() const {
  if (c_.size() <= 1) return {};
  std::vector<double> d(c_.size() - 1);
  for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
  return NonnegPoly(std::move(d));
}

NonnegPoly NonnegPoly::integral() const {
  if (c_.empty()) return {};
  std::vector<double> v(c_.size() + 1, 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) v[i + 1] = c_[i] / static_cast<double>(i + 1);
  return NonnegPoly(std::move(v));
}

NonnegPoly NonnegPoly::operator+(const NonnegPoly& o) const {
  std::vector<double> v(std::max(c_.size(), o.c_.size()), 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i) v[i] += c_[i];
  for (std::size_t i = 0; i < o.c_.size(); ++i) v[i] += o.c_[i];
  return NonnegPoly(std::move(v));
}

NonnegPoly NonnegPoly::operator*(const NonnegPoly& o) const {
  if (c_.empty() || o.c_.empty()) return {};
  std::vector<double> v(c_.size() + o.c_.size() - 1, 0.0);
  for (std::size_t i = 0; i < c_.size(); ++i)
    for (std::size_t j = 0; j < o.c_.size(); ++j) v[i + j] += c_[i] * o.c_[j];
  return NonnegPoly(std::move(v));
}

NonnegPoly NonnegPoly::operator*(double s) const {
  require(s >= 0.0, ErrorCode::kInvalidArgument, "negative scale");
  std::vector<double> v = c_;
  for (double& c : v) c *= s;
  return NonnegPoly(std::move(v));
}

NonnegPoly NonnegPoly::compose(const NonnegPoly& inner) const {
  // Horner in the polynomial ring.
  NonnegPoly acc;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * inner + NonnegPoly::constant(*it);
  return acc;
}

NonnegPoly NonnegPoly::submultiplicative() const {
  std::vector<double> v = c_;
  for (double& c : v)
    if (c > 0.0) c = std::max(c, 1.0);
  return NonnegPoly(std::move(v));
}

NonnegPoly NonnegPoly::max_with(const NonnegPoly& o) const {
  std::vector<double> v(std::max(c_.size(), o.c_.size()), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(coeff(static_cast<int>(i)), o.coeff(static_cast<int>(i)));
  return NonnegPoly(std::move(v));
}

PiecewisePoly::PiecewisePoly(std::vector<double> breaks, std::vector<NonnegPoly> pieces)
    : breaks_(std::move(breaks)), pieces_(std::move(pieces)) {
  require(!breaks_.empty() && breaks_.size() == pieces_.size(), ErrorCode::kInvalidArgument,
          "piecewise polynomial needs one piece per breakpoint");
  require(breaks_.front() == 0.0, ErrorCode::kInvalidArgument, "pieces must start at 0");
  for (std::size_t k = 1; k < breaks_.size(); ++k)
    require(breaks_[k] > breaks_[k - 1], ErrorCode::kInvalidArgument, "breakpoints must increase");
}

const NonnegPoly& PiecewisePoly::piece_at(double x) const {
  require(x >= 0.0, ErrorCode::kDomain, "polynomial envelopes are evaluated on x >= 0");
  auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
  return pieces_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
}

double PiecewisePoly::operator()(double x) const { return piece_at(x)(x); }

double PiecewisePoly::derivative_at(double x) const { return piece_at(x).derivative()(x); }

double PiecewisePoly::continuity_gap() const {
  double gap = 0.0;
  for (std::size_t k = 1; k < breaks_.size(); ++k) {
    double b = breaks_[k];
    gap = std::max(gap, std::abs(pieces_[k - 1](b) - pieces_[k](b)));
  }
  return gap;
}

NonnegPoly build_pa_gf(const NonnegPoly& p, int M) {
  require(M >= 1, ErrorCode::kInvalidArgument, "homogeneity order must be positive");
  require(p.degree() <= M, ErrorCode::kInvalidArgument, "deg p exceeds the homogeneity order");
  std::vector<double> v(std::max(M, 1), 0.0);
  v[0] = p.coeff(1) / (M - 0.5);
  for (int i = 1; i <= M - 1; ++i) v[i] = (i + 1) * p.coeff(i + 1) / (M - i);
  return NonnegPoly(std::move(v));
}

PiecewisePoly build_pa_gd(const NonnegPoly& p, int M) {
  require(M >= 1, ErrorCode::kInvalidArgument, "homogeneity order must be positive");
  require(p.degree() <= M, ErrorCode::kInvalidArgument, "deg p exceeds the homogeneity order");
  if (M == 1) return PiecewisePoly::single(NonnegPoly::constant(p.coeff(1) / 0.5));
  NonnegPoly high = build_pa_gf(p, M);
  // Replace (2 a2/(M-1)) x by (2 a2/(M-1)) (x^2+1)/2 below 1.
  std::vector<double> low(std::max(M, 3), 0.0);
  for (int i = 2; i <= M - 1; ++i) low[i] = (i + 1) * p.coeff(i + 1) / (M - i);
  double lin = 2.0 * p.coeff(2) / (M - 1);
  low[0] = p.coeff(1) / (M - 0.5) + 0.5 * lin;
  low[2] += 0.5 * lin;
  return PiecewisePoly({0.0, 1.0}, {NonnegPoly(std::move(low)), high});
}

std::vector<double> default_pa_grid() {
  std::vector<double> g;
  g.reserve(258);
  g.push_back(0.0);
  g.push_back(1.0);
  for (int k = 0; k < 256; ++k) g.push_back(std::pow(10.0, -3.0 + 6.0 * k / 255.0));
  std::sort(g.begin(), g.end());
  return g;
}

namespace {

template <class Eval, class Deriv>
PaViolation scan(const NonnegPoly& p, int M, const std::vector<double>& grid, Eval pa, Deriv dpa) {
  NonnegPoly dp = p.derivative();
  PaViolation out;
  out.max_residual = -std::numeric_limits<double>::infinity();
  for (double x : grid) {
    double terms = std::abs(x * dpa(x)) + std::abs(dp(x)) + std::abs(M * pa(x));
    double r = x * dpa(x) + dp(x) - M * pa(x);
    if (r > out.max_residual) {
      out.max_residual = r;
      out.argmax = x;
    }
    if (r > kPaRoundoff * terms) ++out.violations;
    ++out.points;
  }
  return out;
}

}  // namespace

PaViolation check_pa_inequality(const NonnegPoly& p, int M, const std::vector<double>& grid) {
  NonnegPoly pa = build_pa_gf(p, M);
  NonnegPoly dpa = pa.derivative();
  return scan(p, M, grid, [&](double x) { return pa(x); }, [&](double x) { return dpa(x); });
}

PaViolation check_pa_inequality_gd(const NonnegPoly& p, int M, const std::vector<double>& grid) {
  PiecewisePoly pa = build_pa_gd(p, M);
  return scan(p, M, grid, [&](double x) { return pa(x); },
              [&](double x) { return pa.derivative_at(x); });
}

void to_json(nlohmann::json& j, const NonnegPoly& p) { j = p.coeffs(); }

void from_json(const nlohmann::json& j, NonnegPoly& p) {
  require(j.is_array(), ErrorCode::kInvalidArgument, "polynomial must be a JSON array of coefficients");
  p = NonnegPoly(j.get<std::vector<double>>());
}

}  // namespace nh
