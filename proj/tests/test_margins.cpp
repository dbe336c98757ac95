#include <cmath>
#include <random>

#include "doctest.h"
#include "nearhom/dynamics.hpp"
#include "nearhom/margins.hpp"
#include "nearhom/toy.hpp"

using nh::Vec;
using nlohmann::json;

namespace {

nh::NetworkModel linear1d() {
  return nh::network_from_json(
      json::parse(R"({"input_dim": 1, "blocks": [{"kind": "Linear", "out": 1, "bias": false}]})"));
}

nh::Dataset ones(int n) {
  nh::Dataset d;
  d.X = nh::Mat::Ones(n, 1);
  d.y = Vec::Ones(n);
  return d;
}

nh::LossEval with_log_loss(double log_loss, int n) {
  nh::LossEval s;
  s.log_loss = log_loss;
  s.loss = std::exp(log_loss);
  s.margins = Vec::Constant(n, 0.0);
  return s;
}

}  // namespace

TEST_SUITE("margins_diagnostics") {
  TEST_CASE("link phi") {
    CHECK(nh::link_phi(-2.0, 1) == doctest::Approx(2.0));
    CHECK(nh::link_phi(-std::log(5.0), 5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(nh::link_phi(-std::log(2.0) - 4.0, 2) == doctest::Approx(4.0));
  }

  TEST_CASE("link Phi") {
    bool outside = false;
    CHECK(nh::link_Phi(2.0, &outside) == doctest::Approx(std::log(2.0) - 1.0));
    CHECK(outside);
    CHECK(nh::link_Phi(std::exp(1.0), &outside) == doctest::Approx(1.0 - 2.0 / std::exp(1.0)));
    CHECK(outside == false);
    CHECK(nh::link_Phi(4.0) > nh::link_Phi(3.0));
    CHECK(std::isnan(nh::link_Phi(-1.0)));
  }

  TEST_CASE("normalized margin") {
    auto m = linear1d();
    auto s = nh::loss(m, Vec::Constant(1, 2.0), ones(1));
    CHECK(nh::normalized_margin(s, 2.0, 1) == doctest::Approx(1.0));
    CHECK_THROWS(nh::normalized_margin(s, 0.0, 1));
  }

  TEST_CASE("normalized margin is scale invariant for homogeneous models") {
    auto m = nh::network_from_json(json::parse(
        R"({"input_dim": 2, "blocks": [{"kind": "Linear", "out": 3, "bias": false}, {"kind": "ReLU"},
            {"kind": "Linear", "out": 1, "bias": false}]})"));
    nh::Dataset d;
    d.X = nh::Mat::Random(5, 2);
    d.y = (Vec(5) << 1, -1, 1, 1, -1).finished();
    Vec th = Vec::Random(m.dim());
    double g1 = nh::normalized_margin(nh::loss(m, th, d), th.norm(), 2);
    for (double c : {0.1, 3.0, 40.0}) {
      Vec t2 = c * th;
      CHECK(nh::normalized_margin(nh::loss(m, t2, d), t2.norm(), 2) == doctest::Approx(g1).epsilon(1e-12));
    }
  }

  TEST_CASE("normalized margin stays under the envelope q(rho) / rho^M") {
    auto toy = nh::toy_model(2, 0.5);
    auto data = nh::gen_symmetric_dataset(2, 8, 0.5, 1).data;
    auto cert = nh::toy_certificate(data.max_norm());
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int k = 0; k < 200; ++k) {
      Vec th(toy.dim());
      for (int i = 0; i < th.size(); ++i) th[i] = 3.0 * g(rng);
      double rho = th.norm();
      CHECK(nh::normalized_margin(nh::loss(toy, th, data), rho, 2) <= cert.q(rho) / (rho * rho) + 1e-12);
    }
  }

  TEST_CASE("gf margin") {
    auto m = linear1d();
    auto s = nh::loss(m, Vec::Constant(1, 2.0), ones(1));
    CHECK(nh::gf_margin(s, 1, 2.0, 0.0, 1) == doctest::Approx(1.0));
    CHECK(nh::gf_margin(s, 1, 2.0, 0.0, 1) == doctest::Approx(nh::smoothed_margin(s, 1, 2.0, 1)));
    double pa = 1.7;
    auto b = with_log_loss(-pa - std::log(3.0), 3);
    CHECK(nh::gf_margin(b, 3, 1.3, pa, 2) == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("smoothed margin") {
    auto m = linear1d();
    for (double th : {0.5, 2.0, 9.0}) {
      auto s = nh::loss(m, Vec::Constant(1, th), ones(1));
      CHECK(nh::smoothed_margin(s, 1, th, 1) == doctest::Approx(nh::normalized_margin(s, th, 1)));
    }
    // Two equal margins 3: L = e^{-3} (mean loss), so phi(L) = log(1/(2 e^{-3})) = 3 - log 2.
    auto s2 = nh::loss(m, Vec::Constant(1, 3.0), ones(2));
    CHECK(nh::smoothed_margin(s2, 2, 1.0, 1) == doctest::Approx(3.0 - std::log(2.0)));
  }

  TEST_CASE("gd margin") {
    auto s = with_log_loss(-4.0, 1);
    CHECK(nh::gd_margin(s, 1, 1.0, 0.0, 2) == doctest::Approx(4.0 * std::exp(-0.5)));
    bool outside = false;
    nh::gd_margin(with_log_loss(-1.0, 1), 1, 1.0, 0.0, 2, &outside);
    CHECK(outside);
    CHECK(std::isnan(nh::gd_margin(with_log_loss(0.5, 1), 1, 1.0, 0.0, 2)));
  }

  TEST_CASE("gd margin is below gf margin inside the modified region") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (int k = 0; k < 500; ++k) {
      int n = 1 + k % 7;
      double pa = u(rng) / 10.0;
      double ll = -std::log(n) - pa - 1e-3 - u(rng);  // G < 1/n
      auto s = with_log_loss(ll, n);
      double rho = 0.5 + u(rng);
      CHECK(nh::gd_margin(s, n, rho, pa, 2) < nh::gf_margin(s, n, rho, pa, 2));
    }
  }

  TEST_CASE("epsilon_t") {
    CHECK(*nh::epsilon_t(with_log_loss(-3.0, 1), 1, 0.0) == 0.0);
    auto s = with_log_loss(-std::log(2.0) - 11.0, 2);
    CHECK(*nh::epsilon_t(s, 2, 1.0) == doctest::Approx((std::log(2.0) + 1.0) / 10.0));
    CHECK_FALSE(nh::epsilon_t(with_log_loss(0.0, 1), 1, 0.5).has_value());
  }

  TEST_CASE("radial speed") {
    auto m = linear1d();
    CHECK(nh::radial_speed(m, Vec::Ones(1), ones(1)) == doctest::Approx(std::exp(-1.0)));
    CHECK(nh::radial_speed(m, Vec::Zero(1), ones(1)) == 0.0);
  }

  TEST_CASE("speed bracket holds past separability") {
    auto toy = nh::toy_model(2, 0.5);
    auto data = nh::gen_symmetric_dataset(2, 8, 0.5, 4).data;
    auto cert = nh::toy_certificate(data.max_norm());
    auto run = nh::run_reduced_ode([] {
      nh::ToyConfig c;
      c.horizon = 5e3;
      c.seed = 4;
      return c;
    }(), data);
    int checked = 0;
    for (const auto& r : run.traj.records) {
      if (!r.sep) continue;
      double vl = 0.0;
      nh::radial_speed(toy, r.theta, data, &vl);
      auto s = nh::loss(toy, r.theta, data);
      auto br = nh::speed_bracket(s, data.n(), 2, cert.p.derivative()(r.rho));
      CHECK(vl >= br.lower - 1e-9 * std::abs(br.lower));
      CHECK(vl <= br.upper + 1e-9 * std::abs(br.upper));
      ++checked;
    }
    CHECK(checked > 5);
  }

  TEST_CASE("naive and log-domain margins agree") {
    auto m = linear1d();
    auto s = nh::loss(m, Vec::Constant(1, 5.0), ones(3));
    auto d = nh::naive_margin_disagreement(s, 3, 5.0, 1, 0.2);
    REQUIRE(d.has_value());
    CHECK(*d <= 1e-12);
    auto under = nh::loss(m, Vec::Constant(1, 2000.0), ones(3));
    CHECK_FALSE(nh::naive_margin_disagreement(under, 3, 2000.0, 1, 0.2).has_value());
  }

  TEST_CASE("sandwich holds for any nonnegative offset (property)") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.0, 3.0);
    auto m = nh::network_from_json(
        json::parse(R"({"input_dim": 2, "blocks": [{"kind": "Linear", "out": 1, "bias": false}]})"));
    nh::Dataset d;
    d.X = nh::Mat::Random(6, 2);
    d.X.col(0) = d.X.col(0).cwiseAbs().array() + 0.2;
    d.y = Vec::Ones(6);
    int checked = 0;
    for (int k = 0; k < 1000; ++k) {
      Vec th(2);
      th << 1.0 + 20.0 * std::abs(g(rng)), 0.1 * g(rng);
      double pa = u(rng);
      auto s = nh::loss(m, th, d);
      if (!(s.log_loss < -pa - std::log(6.0))) continue;
      auto snap = nh::margin_snapshot(s, 6, th.norm(), 1, pa);
      CHECK(nh::sandwich_holds(snap));
      ++checked;
    }
    CHECK(checked > 100);
  }
}
