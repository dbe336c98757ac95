#include <cmath>
#include <random>

#include "doctest.h"
#include "nearhom/errors.hpp"
#include "nearhom/kkt.hpp"

using nh::Vec;
using nlohmann::json;

namespace {

nh::NetworkModel linear(int d) {
  json j{{"input_dim", d}, {"blocks", {{{"kind", "Linear"}, {"out", 1}, {"bias", false}}}}};
  return nh::network_from_json(j);
}

// Bias-free Linear(h) -> ReLU -> Linear(1); exactly 2-homogeneous.
nh::NetworkModel relu_mlp(int d, int h) {
  json j{{"input_dim", d},
         {"blocks",
          {{{"kind", "Linear"}, {"out", h}, {"bias", false}},
           {{"kind", "ReLU"}},
           {{"kind", "Linear"}, {"out", 1}, {"bias", false}}}}};
  return nh::network_from_json(j);
}

nh::Dataset make_data(const nh::Mat& X, const Vec& y) { return nh::Dataset{X, y}; }

}  // namespace

TEST_SUITE("kkt_diagnostics") {
  TEST_CASE("single sample multiplier") {
    auto m = linear(2);
    nh::Mat X(1, 2);
    X << 3.0, 4.0;
    auto data = make_data(X, Vec::Ones(1));
    Vec w(2);
    w << 1.0, 0.5;
    auto hs = nh::homogenize_samples(m, w, data, 1, nh::NonnegPoly{});
    auto eval = nh::loss(m, w, data);
    auto lam = nh::compute_lambdas(eval, hs, w.norm(), 1);
    REQUIRE(lam.size() == 1);
    // n = 1: lambda = fM^{1 - 2/M} rho / ||grad fM|| with fM = w.x = 5 and grad fM = x.
    CHECK(lam[0] == doctest::Approx(std::pow(5.0, -1.0) * w.norm() / 5.0));
  }

  TEST_CASE("symmetric samples get equal multipliers") {
    auto m = linear(2);
    nh::Mat X(2, 2);
    X << 1.0, 0.2, -1.0, -0.2;
    Vec y(2);
    y << 1.0, -1.0;
    auto data = make_data(X, y);
    Vec w(2);
    w << 2.0, -0.3;
    auto r = nh::kkt_residuals(m, w, data, 1, nh::NonnegPoly{}, 0.0);
    REQUIRE(r.lambdas.size() == 2);
    CHECK(r.lambdas[0] == doctest::Approx(r.lambdas[1]).epsilon(1e-14));
  }

  TEST_CASE("beta") {
    Vec a(3), b(3);
    a << 1.0, 2.0, 0.0;
    CHECK(nh::compute_beta(a, 4.0 * a) == doctest::Approx(1.0));
    b << -2.0, 1.0, 5.0;
    CHECK(std::abs(nh::compute_beta(a, b)) < 1e-15);
    CHECK(nh::compute_beta(a, -a) == doctest::Approx(-1.0));
    CHECK_THROWS(nh::compute_beta(a, Vec::Zero(3)));
  }

  TEST_CASE("aligned point has zero eps and zero stationarity") {
    auto m = linear(2);
    nh::Mat X(1, 2);
    X << 0.6, 0.8;
    auto data = make_data(X, Vec::Ones(1));
    Vec w = 3.0 * X.row(0).transpose();
    auto r = nh::kkt_residuals(m, w, data, 1, nh::NonnegPoly{}, 1.0);
    CHECK(r.beta == doctest::Approx(1.0));
    CHECK(r.eps == doctest::Approx(0.0));
    CHECK(r.stationarity < 1e-12);
    CHECK(r.feasibility == doctest::Approx(1.0));
    CHECK(r.complementarity < 1e-12);
  }

  TEST_CASE("delta formula") {
    // f = a relu(w x) at x = 1 with w a = 10: fM_min = 10, n = 1, M = 2, p_a = 0, B = 1.
    auto m = relu_mlp(1, 1);
    auto data = make_data(nh::Mat::Ones(1, 1), Vec::Ones(1));
    Vec th(2);
    th << 2.0, 5.0;
    auto r = nh::kkt_residuals(m, th, data, 2, nh::NonnegPoly{}, 1.0);
    CHECK(r.fM_min == doctest::Approx(10.0));
    CHECK(r.delta == doctest::Approx(1.0 / 20.0));
    CHECK(r.B_const == 1.0);
  }

  TEST_CASE("stationarity identity on exactly homogeneous models") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    auto m = relu_mlp(3, 4);
    nh::Mat X(5, 3);
    for (int i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
    Vec y = Vec::Ones(5);
    auto data = make_data(X, y);
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 10; ++trial) {
      Vec th(m.dim());
      for (int i = 0; i < th.size(); ++i) th[i] = 2.0 * g(rng);
      auto s = nh::loss(m, th, data);
      if (!(s.min_margin > std::log(5.0))) continue;
      auto r = nh::kkt_residuals(m, th, data, 2, nh::NonnegPoly{}, 0.0);
      // ||theta_hat - sum lambda_i grad fbar_M,i(theta_hat)|| = B_t sqrt(2 - 2 beta).
      CHECK(r.stationarity == doctest::Approx(r.stationarity_identity).epsilon(1e-8));
      CHECK(r.stationarity <= r.eps + 1e-6);
      CHECK(r.feasibility == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(r.B_const == r.B_t);
      for (double l : r.lambdas) CHECK(l >= 0.0);
      CHECK(r.complementarity <= r.delta + 1e-9);
      ++checked;
    }
    CHECK(checked == 10);
  }

  TEST_CASE("B_t is scale invariant and B_const scales delta quadratically") {
    auto m = relu_mlp(1, 1);
    auto data = make_data(nh::Mat::Ones(1, 1), Vec::Ones(1));
    Vec th(2);
    th << 2.0, 5.0;
    auto a = nh::kkt_residuals(m, th, data, 2, nh::NonnegPoly{}, 0.0);
    auto b = nh::kkt_residuals(m, 3.0 * th, data, 2, nh::NonnegPoly{}, 0.0);
    CHECK(a.B_t == doctest::Approx(b.B_t));
    auto c = nh::kkt_residuals(m, th, data, 2, nh::NonnegPoly{}, 2.0 * a.B_t);
    CHECK(c.delta == doctest::Approx(4.0 * a.delta));
  }

  TEST_CASE("non-separable points are rejected") {
    auto m = linear(1);
    nh::Mat X(2, 1);
    X << 1.0, 1.0;
    Vec y(2);
    y << 1.0, -1.0;
    auto data = make_data(X, y);
    CHECK_THROWS_AS(nh::kkt_residuals(m, Vec::Ones(1), data, 1, nh::NonnegPoly{}, 1.0), nh::Error);
  }

  TEST_CASE("report JSON carries both B variants") {
    auto m = relu_mlp(1, 1);
    auto data = make_data(nh::Mat::Ones(1, 1), Vec::Ones(1));
    Vec th(2);
    th << 2.0, 5.0;
    json j = nh::kkt_residuals(m, th, data, 2, nh::NonnegPoly{}, 1.5);
    for (const char* k : {"lambdas", "beta", "eps", "delta", "B_const", "B_t", "eps_time_varying",
                          "delta_time_varying", "fM_min", "stationarity_measured", "feasibility_min"})
      CHECK(j.contains(k));
    CHECK(j["grad_source"] == "radial_limit");
  }
}
