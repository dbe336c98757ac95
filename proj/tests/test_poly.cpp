#include <cmath>
#include <random>

#include "doctest.h"
#include "nearhom/errors.hpp"
#include "nearhom/poly.hpp"

using nh::NonnegPoly;

namespace {

// Independent p_a (GF): sum_{i=1}^{M-1} (i+1) a_{i+1} / (M - i) x^i + a_1 / (M - 1/2).
double pa_gf_oracle(const std::vector<double>& a, int M, double x) {
  auto coef = [&](int i) { return i < static_cast<int>(a.size()) ? a[i] : 0.0; };
  double v = coef(1) / (M - 0.5);
  for (int i = 1; i <= M - 1; ++i) v += (i + 1) * coef(i + 1) / (M - i) * std::pow(x, i);
  return v;
}

NonnegPoly random_poly(std::mt19937_64& rng, int max_deg) {
  std::uniform_int_distribution<int> deg(0, max_deg);
  std::uniform_real_distribution<double> c(0.0, 5.0);
  std::bernoulli_distribution zero(0.3);
  int d = deg(rng);
  std::vector<double> co(d + 1);
  for (double& v : co) v = zero(rng) ? 0.0 : c(rng);
  return NonnegPoly(co);
}

}  // namespace

TEST_SUITE("poly_core") {
  TEST_CASE("evaluation") {
    CHECK(NonnegPoly::monomial(2)(3.0) == 9.0);
    CHECK(NonnegPoly()(17.0) == 0.0);
    CHECK(NonnegPoly({2.0, 0.0, 0.0, 1.0})(2.0) == 10.0);
    CHECK_THROWS_AS(NonnegPoly::monomial(2)(-1.0), nh::Error);
  }

  TEST_CASE("negative coefficients are rejected") { CHECK_THROWS_AS(NonnegPoly({1.0, -0.5}), nh::Error); }

  TEST_CASE("degree convention and trimming") {
    CHECK(NonnegPoly().degree() == 0);
    CHECK(NonnegPoly({0.0, 0.0}).is_zero());
    CHECK(NonnegPoly({1.0, 2.0, 0.0}).degree() == 1);
  }

  TEST_CASE("derivative") {
    CHECK(NonnegPoly::monomial(3).derivative() == NonnegPoly({0.0, 0.0, 3.0}));
    CHECK(NonnegPoly().derivative().is_zero());
    CHECK(NonnegPoly({1.0, 2.0, 1.0}).derivative() == NonnegPoly({2.0, 2.0}));
  }

  TEST_CASE("integral inverts derivative up to the constant") {
    NonnegPoly p({0.0, 2.0, 3.0});
    CHECK(p.integral().derivative() == p);
  }

  TEST_CASE("composition and products") {
    NonnegPoly p({1.0, 1.0});            // 1 + x
    NonnegPoly q = NonnegPoly::monomial(2);  // x^2
    for (double x : {0.0, 0.5, 2.0}) {
      CHECK(p.compose(q)(x) == doctest::Approx(1.0 + x * x));
      CHECK((p * q)(x) == doctest::Approx((1.0 + x) * x * x));
      CHECK((p + q)(x) == doctest::Approx(1.0 + x + x * x));
    }
  }

  TEST_CASE("submultiplicative envelope") {
    NonnegPoly g = NonnegPoly({0.2, 0.0, 0.5}).submultiplicative();
    for (double a : {0.0, 0.3, 1.0, 4.0})
      for (double b : {0.0, 0.7, 2.0}) CHECK(g(a * b) <= g(a) * g(b) + 1e-12);
  }

  TEST_CASE("build_pa_gf examples") {
    CHECK(nh::build_pa_gf(NonnegPoly(), 2).is_zero());
    NonnegPoly c3 = nh::build_pa_gf(NonnegPoly::monomial(3), 3);
    CHECK(c3.degree() == 2);
    CHECK(c3.coeff(2) == doctest::Approx(3.0));
    CHECK(c3.coeff(0) == 0.0);
    NonnegPoly lin = nh::build_pa_gf(NonnegPoly::monomial(1), 2);
    CHECK(lin.degree() == 0);
    CHECK(lin.coeff(0) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(nh::build_pa_gf(NonnegPoly::monomial(3), 2), nh::Error);
  }

  TEST_CASE("build_pa_gf against the closed form") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 200; ++trial) {
      int M = 1 + trial % 6;
      NonnegPoly p = random_poly(rng, M);
      NonnegPoly pa = nh::build_pa_gf(p, M);
      CHECK(pa.degree() <= std::max(0, M - 1));
      for (double x : {0.0, 0.25, 1.0, 3.0})
        CHECK(pa(x) == doctest::Approx(pa_gf_oracle(p.coeffs(), M, x)).epsilon(1e-12));
    }
  }

  TEST_CASE("build_pa_gd examples") {
    nh::PiecewisePoly m1 = nh::build_pa_gd(NonnegPoly({0.0, 1.5}), 1);
    for (double x : {0.0, 0.5, 1.0, 7.0}) CHECK(m1(x) == doctest::Approx(3.0));
    nh::PiecewisePoly z = nh::build_pa_gd(NonnegPoly(), 4);
    for (double x : {0.0, 0.5, 3.0}) CHECK(z(x) == 0.0);
    nh::PiecewisePoly c3 = nh::build_pa_gd(NonnegPoly::monomial(3), 3);
    for (double x : {0.0, 0.5, 0.999}) CHECK(c3(x) == doctest::Approx(3.0 * x * x));
    CHECK(c3(1.0) == doctest::Approx(3.0));
    CHECK(c3(2.0) == doctest::Approx(12.0));
    CHECK(c3.continuity_gap() <= 1e-12);
  }

  TEST_CASE("build_pa_gd replaces the linear term below 1") {
    // p = x^2 with M = 3: GF p_a has 2 a_2 / (M - 1) x = x; GD uses (x^2 + 1)/2 there.
    NonnegPoly p = NonnegPoly::monomial(2);
    nh::PiecewisePoly gd = nh::build_pa_gd(p, 3);
    NonnegPoly gf = nh::build_pa_gf(p, 3);
    for (double x : {2.0, 5.0}) CHECK(gd(x) == doctest::Approx(gf(x)));
    for (double x : {0.0, 0.5}) CHECK(gd(x) == doctest::Approx((x * x + 1.0) / 2.0));
    CHECK(gd.continuity_gap() <= 1e-12);
  }

  TEST_CASE("p_a inequality examples") {
    auto grid = nh::default_pa_grid();
    CHECK(grid.size() == 258);
    nh::PaViolation z = nh::check_pa_inequality(NonnegPoly(), 2, grid);
    CHECK(z.max_residual == 0.0);
    nh::PaViolation c = nh::check_pa_inequality(NonnegPoly::monomial(3), 3, grid);
    CHECK(std::abs(c.max_residual) <= 1e-9);
    CHECK(c.violations == 0);
  }

  TEST_CASE("p_a inequality holds for random polynomials (property)") {
    std::mt19937_64 rng(202);
    auto grid = nh::default_pa_grid();
    for (int trial = 0; trial < 300; ++trial) {
      int M = 1 + trial % 6;
      NonnegPoly p = random_poly(rng, M);
      CHECK(nh::check_pa_inequality(p, M, grid).violations == 0);
      CHECK(nh::check_pa_inequality_gd(p, M, grid).violations == 0);
      CHECK(nh::build_pa_gd(p, M).continuity_gap() <= 1e-9 * (1.0 + p(1.0)));
    }
  }

  TEST_CASE("GF residual equals -a1/(2(M - 1/2)) exactly") {
    std::mt19937_64 rng(303);
    for (int M = 2; M <= 6; ++M) {
      NonnegPoly p = random_poly(rng, M);
      NonnegPoly pa = nh::build_pa_gf(p, M);
      for (double x : {0.1, 1.0, 4.0}) {
        double r = pa.derivative()(x) * x + p.derivative()(x) - M * pa(x);
        double expect = -p.coeff(1) / (2.0 * (M - 0.5));
        CHECK(r == doctest::Approx(expect).epsilon(1e-9).scale(1.0 + p(x)));
      }
    }
  }

  TEST_CASE("json round trip") {
    NonnegPoly p({1.0, 0.0, 2.5});
    nlohmann::json j = p;
    CHECK(j.dump() == "[1.0,0.0,2.5]");
    CHECK(j.get<NonnegPoly>() == p);
  }
}
