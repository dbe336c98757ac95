#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "nearhom/dynamics.hpp"
#include "nearhom/toy.hpp"

using nh::Vec;
using nlohmann::json;

namespace {

nh::NetworkModel linear1d() {
  return nh::network_from_json(
      json::parse(R"({"input_dim": 1, "blocks": [{"kind": "Linear", "out": 1, "bias": false}]})"));
}

nh::NetworkModel cubic() {
  return nh::network_from_json(json::parse(R"({"input_dim": 1, "blocks": [{"kind": "PowerCounterexample", "M": 3}]})"));
}

nh::Dataset one_point() {
  nh::Dataset d;
  d.X = nh::Mat::Ones(1, 1);
  d.y = Vec::Ones(1);
  return d;
}

nh::DynamicsConfig gf(double horizon) {
  nh::DynamicsConfig c;
  c.mode = nh::Mode::kGF;
  c.horizon = horizon;
  return c;
}

nh::DynamicsConfig gd(double eta, long steps) {
  nh::DynamicsConfig c;
  c.mode = nh::Mode::kGD;
  c.eta = eta;
  c.max_steps = steps;
  return c;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("one GD step by hand") {
    auto m = linear1d();
    auto data = one_point();
    auto cert = nh::certificate_from_model(m, data);
    auto tr = nh::run_gd(m, data, Vec::Zero(1), cert, gd(1.0, 1));
    // grad L = -e^{-theta} x y, so theta_1 = 0 + 1 * e^0 = 1.
    CHECK(tr.theta_final(0) == doctest::Approx(1.0).epsilon(1e-15));
    REQUIRE(tr.records.size() == 2);
    CHECK(tr.records[1].t == 1.0);
    CHECK(tr.records[1].log_loss == doctest::Approx(-1.0));
  }

  TEST_CASE("GD t column is eta times step") {
    auto m = linear1d();
    auto data = one_point();
    auto tr = nh::run_gd(m, data, Vec::Zero(1), nh::certificate_from_model(m, data), gd(0.25, 50));
    for (const auto& r : tr.records) CHECK(r.t == doctest::Approx(0.25 * r.step));
  }

  TEST_CASE("invalid configs are rejected") {
    auto m = linear1d();
    auto data = one_point();
    auto cert = nh::certificate_from_model(m, data);
    CHECK_THROWS(nh::run_gd(m, data, Vec::Zero(1), cert, gd(0.0, 10)));
    CHECK_THROWS(nh::run_gd(m, data, Vec::Zero(1), cert, gf(10.0)));
    CHECK_THROWS(nh::run_gf(m, data, Vec::Zero(1), cert, gd(1.0, 10)));
    auto c = gf(10.0);
    c.gf_tolerance = 0.0;
    CHECK_THROWS(nh::run_gf(m, data, Vec::Zero(1), cert, c));
    CHECK_THROWS(nh::run_gf(m, data, Vec::Zero(2), cert, gf(1.0)));
  }

  TEST_CASE("GF matches the closed-form flow") {
    auto m = linear1d();
    auto data = one_point();
    auto tr = nh::run_gf(m, data, Vec::Zero(1), nh::certificate_from_model(m, data), gf(10.0));
    // theta' = e^{-theta} from 0 solves to log(1 + t).
    CHECK(std::abs(tr.theta_final(0) - std::log(11.0)) < 1e-4);
    CHECK(tr.records.back().t == 10.0);
    for (const auto& r : tr.records) CHECK(r.theta(0) == doctest::Approx(std::log1p(r.t)).epsilon(1e-5));
  }

  TEST_CASE("checkpoints are geometric") {
    auto m = linear1d();
    auto data = one_point();
    auto tr = nh::run_gf(m, data, Vec::Zero(1), nh::certificate_from_model(m, data), gf(100.0));
    REQUIRE(tr.records.size() > 10);
    for (std::size_t i = 2; i + 2 < tr.records.size(); ++i)  // the last one is clipped to the horizon
      CHECK(tr.records[i + 1].t / tr.records[i].t == doctest::Approx(1.2));
  }

  TEST_CASE("cubic counter-example flow stays at its stationary point") {
    auto m = cubic();
    auto data = one_point();
    auto cert = nh::certificate_from_model(m, data);
    CHECK(cert.M == 3);
    auto tr = nh::run_gf(m, data, Vec::Zero(1), cert, gf(100.0));
    for (const auto& r : tr.records) CHECK(r.theta(0) == 0.0);
    CHECK(tr.checks.sep_step < 0);
  }

  TEST_CASE("cubic counter-example flow from -1 stalls at -2") {
    auto m = cubic();
    auto data = one_point();
    auto cert = nh::certificate_from_model(m, data);
    Vec th0 = Vec::Constant(1, -1.0);
    auto tr = nh::run_gf(m, data, th0, cert, gf(1e3));
    // f(-2) = -8 + 12 = 4 and f'(-2) = 12 - 12 = 0.
    CHECK(tr.theta_final(0) == doctest::Approx(-2.0).epsilon(1e-4));
    CHECK(tr.records.back().log_loss == doctest::Approx(-4.0).epsilon(1e-4));
    CHECK(tr.checks.max_theta_coeff <= 0.0);
    CHECK(tr.checks.min_log_loss >= -4.0 - 1e-9);
    CHECK_FALSE(tr.checks.sep_time.has_value());

    auto gtr = nh::run_gd(m, data, th0, cert, gd(0.01, 20000));
    CHECK(gtr.checks.max_theta_coeff <= 0.0);
    CHECK(gtr.checks.min_log_loss >= -4.0 - 1e-9);
    CHECK(gtr.theta_final(0) == doctest::Approx(-2.0).epsilon(1e-4));
  }

  TEST_CASE("GF detector with p_a = 0 is the sign of the margin") {
    auto m = linear1d();
    auto data = one_point();
    for (double th : {-1.0, -0.1, 0.1, 2.0}) {
      auto s = nh::loss(m, Vec::Constant(1, th), data);
      CHECK(nh::detect_separability_gf(s, 1, std::abs(th), nh::NonnegPoly{}) == (th > 0.0));
    }
  }

  TEST_CASE("GF detector on the cubic counter-example is theta > 0") {
    auto m = cubic();
    auto data = one_point();
    auto pa = nh::certificate_from_model(m, data).pa_gf();
    for (double th : {-3.0, -1.0, -0.2, 0.2, 1.0, 3.0}) {
      auto s = nh::loss(m, Vec::Constant(1, th), data);
      CHECK(nh::detect_separability_gf(s, 1, std::abs(th), pa) == (th > 0.0));
    }
  }

  TEST_CASE("GD detector") {
    nh::LossEval s;
    auto zero = nh::PiecewisePoly::single(nh::NonnegPoly{});
    // n = 1, p_a = 0, B eta = 1: L < e^{-2}.
    s.log_loss = -2.0 - 1e-9;
    CHECK(nh::detect_separability_gd(s, 1, 1.0, zero, 1.0, 1.0));
    s.log_loss = -2.0 + 1e-9;
    CHECK_FALSE(nh::detect_separability_gd(s, 1, 1.0, zero, 1.0, 1.0));
    // Small eta: first branch, L < e^{-p_a}/(n e^2).
    auto pa = nh::PiecewisePoly::single(nh::NonnegPoly({0.5}));
    s.log_loss = -std::log(4.0) - 2.0 - 0.5 - 1e-9;
    CHECK(nh::detect_separability_gd(s, 4, 1.0, pa, 1e-12, 1.0));
    s.log_loss += 2e-9;
    CHECK_FALSE(nh::detect_separability_gd(s, 4, 1.0, pa, 1e-12, 1.0));
    CHECK_THROWS(nh::detect_separability_gd(s, 1, 1.0, zero, 1.0, 0.0));
  }

  TEST_CASE("direction chord") {
    nh::DirectionState st;
    nh::update_direction(st, Vec::Unit(2, 0));
    CHECK(st.zeta == 0.0);
    nh::update_direction(st, 7.5 * Vec::Unit(2, 0));
    CHECK(st.zeta == 0.0);
    Vec r(2);
    r << 3.0 * std::cos(0.1), 3.0 * std::sin(0.1);
    nh::update_direction(st, r);
    CHECK(st.zeta == doctest::Approx(2.0 * std::sin(0.05)).epsilon(1e-12));
    CHECK(st.dir.norm() == doctest::Approx(1.0));
    CHECK_THROWS(nh::update_direction(st, Vec::Zero(2)));
  }

  TEST_CASE("trajectory CSV layout") {
    auto m = linear1d();
    auto data = one_point();
    auto tr = nh::run_gd(m, data, Vec::Zero(1), nh::certificate_from_model(m, data), gd(1.0, 20));
    std::stringstream ss(nh::trajectory_csv(tr));
    std::string header, row;
    std::getline(ss, header);
    CHECK(header == "t,log_loss,rho,v,gamma,gamma_tilde,gamma_bar,gamma_hat,G_log,eps_t,sep,zeta,beta,kkt_eps,kkt_delta");
    std::size_t rows = 0;
    while (std::getline(ss, row)) {
      ++rows;
      CHECK(split(row + ",").size() == 15);
    }
    CHECK(rows == tr.records.size());
  }

  TEST_CASE("toy GD run: persistence, monotone margin, growing norm") {
    nh::ToyDataset td = nh::gen_symmetric_dataset(2, 8, 0.5, 3);
    auto m = nh::toy_model(2, 0.5);
    auto cert = nh::toy_certificate(td.data.max_norm());
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Vec th0(m.dim());
    for (int i = 0; i < th0.size(); ++i) th0(i) = 0.1 * g(rng);
    auto tr = nh::run_gd(m, td.data, th0, cert, gd(1.0, 30000));
    REQUIRE(tr.checks.sep_time.has_value());
    CHECK(tr.checks.sep_violations == 0);
    CHECK(tr.checks.margin_violations == 0);
    CHECK(tr.checks.rho_violations == 0);
    CHECK(tr.checks.loss_violations == 0);
    CHECK(tr.checks.sandwich_violations == 0);
    bool after = false;
    double prev_zeta = 0.0;
    for (const auto& r : tr.records) {
      CHECK(r.zeta >= prev_zeta);
      prev_zeta = r.zeta;
      if (after) CHECK(r.sep);
      after = after || r.sep;
    }
  }

  TEST_CASE("runs are deterministic") {
    auto m = linear1d();
    auto data = one_point();
    auto cert = nh::certificate_from_model(m, data);
    auto a = nh::trajectory_csv(nh::run_gf(m, data, Vec::Zero(1), cert, gf(50.0)));
    auto b = nh::trajectory_csv(nh::run_gf(m, data, Vec::Zero(1), cert, gf(50.0)));
    CHECK(a == b);
  }
}
