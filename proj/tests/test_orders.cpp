#include <random>

#include "doctest.h"
#include "nearhom/errors.hpp"
#include "nearhom/network.hpp"
#include "nearhom/orders.hpp"
#include "nearhom/verify.hpp"

using nh::OrderDescriptor;
using nlohmann::json;

namespace {

OrderDescriptor od(int m, int n) {
  OrderDescriptor d;
  d.m_param = m;
  d.m_input = n;
  return d;
}

nh::BlockKind kind(nh::BlockTag tag, int in = 2, int out = 2) {
  nh::BlockKind k;
  k.tag = tag;
  k.in_dim = in;
  k.out_dim = out;
  return k;
}

// Closed form M1 = sum_j M1^j prod_{i<j} M2^i, M2 = prod_j M2^j, outermost first.
std::pair<int, int> closed_form(const std::vector<OrderDescriptor>& outer_first) {
  long m1 = 0, prod = 1;
  for (const auto& d : outer_first) {
    m1 += d.m_param * prod;
    prod *= d.m_input;
  }
  return {static_cast<int>(m1), static_cast<int>(prod)};
}

json relu_mlp(int layers, int width) {
  json blocks = json::array();
  for (int l = 0; l < layers - 1; ++l) {
    blocks.push_back({{"kind", "Linear"}, {"out", width}});
    blocks.push_back({{"kind", "ReLU"}});
  }
  blocks.push_back({{"kind", "Linear"}, {"out", 1}});
  return {{"input_dim", 3}, {"blocks", blocks}};
}

}  // namespace

TEST_SUITE("homogeneity_calculus") {
  TEST_CASE("catalog orders") {
    auto lin = nh::catalog_order(kind(nh::BlockTag::kLinear, 3, 4));
    CHECK(lin.m_param == 1);
    CHECK(lin.m_input == 1);
    CHECK(lin.env_t(1.0) == doctest::Approx(std::sqrt(3.0) + std::sqrt(4.0)));
    auto sw = nh::catalog_order(kind(nh::BlockTag::kSwiGLU));
    CHECK(sw.m_param == 2);
    CHECK(sw.m_input == 2);
    nh::BlockKind ra = kind(nh::BlockTag::kReluAttention, 4, 4);
    ra.model_dim = 2;
    ra.tokens = 2;
    auto r = nh::catalog_order(ra);
    CHECK(r.m_param == 4);
    CHECK(r.m_input == 3);
    nh::BlockKind la = ra;
    la.tag = nh::BlockTag::kLinearAttention;
    auto l = nh::catalog_order(la);
    CHECK(l.m_param == 2);
    CHECK(l.m_input == 3);
    for (auto t : {nh::BlockTag::kActivation, nh::BlockTag::kPooling, nh::BlockTag::kConv, nh::BlockTag::kResidual}) {
      auto d = nh::catalog_order(kind(t));
      CHECK(d.m_param == 0);
      CHECK(d.m_input == 1);
    }
    nh::BlockKind pp = kind(nh::BlockTag::kPerceptronPow);
    pp.power = 3;
    CHECK(nh::catalog_order(pp).m_param == 3);
  }

  TEST_CASE("unknown kinds are rejected") {
    CHECK_THROWS_AS(nh::orders_from_json(json::parse(R"([{"kind": "Softmax"}])")), nh::Error);
  }

  TEST_CASE("compose_orders") {
    auto a = nh::compose_orders(od(1, 1), od(2, 3));
    CHECK(a.m_param == 3);
    CHECK(a.m_input == 3);
    auto b = nh::compose_orders(od(0, 1), od(4, 2));
    CHECK(b.m_param == 4);
    CHECK(b.m_input == 2);
    auto c = nh::compose_orders(od(1, 3), od(1, 1));
    CHECK(c.m_param == 4);
    CHECK(c.m_input == 3);
  }

  TEST_CASE("tensor_orders") {
    auto a = nh::tensor_orders(od(1, 1), od(1, 1));
    CHECK(a.m_param == 2);
    CHECK(a.m_input == 2);
    auto b = nh::tensor_orders(od(0, 1), od(0, 1));
    CHECK(b.m_param == 0);
    CHECK(b.m_input == 2);
  }

  TEST_CASE("descriptors with M + N = 0 are rejected") {
    CHECK_THROWS_AS(od(0, 0).validate(), nh::Error);
    CHECK_THROWS_AS(json::parse(R"({"m_param": 0, "m_input": 0})").get<OrderDescriptor>(), nh::Error);
  }

  TEST_CASE("sum_orders") {
    auto a = nh::sum_orders(od(0, 1), od(2, 3));
    CHECK(a.m_param == 2);
    CHECK(a.m_input == 3);
    auto b = nh::sum_orders(od(1, 1), od(1, 1));
    CHECK(b.m_param == 1);
    CHECK(b.m_input == 1);
    auto c = nh::sum_orders(od(3, 2), od(2, 3));
    CHECK(c.m_param == 3);
    CHECK(c.m_input == 3);
  }

  TEST_CASE("linear_map_order keeps orders and scales q") {
    for (auto [m, n] : {std::pair{2, 2}, {0, 1}, {4, 3}}) {
      OrderDescriptor d = od(m, n);
      d.env_q = nh::NonnegPoly::monomial(m, 2.0);
      auto r = nh::linear_map_order(d, 3.0);
      CHECK(r.m_param == m);
      CHECK(r.m_input == n);
      CHECK(r.env_q(1.0) == doctest::Approx(6.0));
    }
  }

  TEST_CASE("network_order examples") {
    for (int L = 1; L <= 8; ++L) {
      auto d = nh::network_order(std::vector<OrderDescriptor>(L, od(1, 1)));
      CHECK(d.m_param == L);
      CHECK(d.m_input == 1);
    }
    for (int k = 2; k <= 4; ++k)
      for (int L = 1; L <= 5; ++L) {
        auto d = nh::network_order(std::vector<OrderDescriptor>(L, od(1, k)));
        int kL = 1;
        for (int i = 0; i < L; ++i) kL *= k;
        CHECK(d.m_param == (kL - 1) / (k - 1));
        CHECK(d.m_input == kL);
      }
    auto mixed = nh::network_order({od(1, 1), od(2, 3)});
    CHECK(mixed.m_param == 3);
    CHECK(mixed.m_input == 3);
    CHECK_THROWS_AS(nh::network_order({}), nh::Error);
  }

  TEST_CASE("formula equals the compose fold (exhaustive, L <= 6, orders <= 4)") {
    // Every list of L copies of one descriptor, plus mixed pairs.
    for (int L = 1; L <= 6; ++L)
      for (int m = 0; m <= 4; ++m)
        for (int n = 0; n <= 4; ++n) {
          if (m + n < 1) continue;
          std::vector<OrderDescriptor> list(L, od(m, n));
          auto d = nh::network_order(list);
          auto [m1, m2] = closed_form(list);
          CHECK(d.m_param == m1);
          CHECK(d.m_input == m2);
          OrderDescriptor fold = list.back();
          for (int j = L - 2; j >= 0; --j) fold = nh::compose_orders(list[j], fold);
          CHECK(fold.m_param == m1);
          CHECK(fold.m_input == m2);
        }
  }

  TEST_CASE("ReLU MLP of depth L has order L") {
    for (int L = 1; L <= 6; ++L) {
      nh::NetworkModel m = nh::network_from_json(relu_mlp(L, 3));
      CHECK(m.order().m_param == L);
    }
  }

  TEST_CASE("ReLU^k perceptron stack") {
    for (int k = 2; k <= 3; ++k)
      for (int L = 2; L <= 4; ++L) {
        json blocks = json::array();
        blocks.push_back({{"kind", "PerceptronPow"}, {"k", k}, {"repeat", L - 1}, {"out", 2}});
        blocks.push_back({{"kind", "Linear"}, {"out", 1}});
        int kL = 1;
        for (int i = 0; i < L; ++i) kL *= k;
        CHECK(nh::orders_from_json(blocks).m_param == (kL - 1) / (k - 1));
      }
  }

  TEST_CASE("ResNet-18 style list") {
    // Stem layer, eight two-layer residual blocks, classifier: 18 trainable layers.
    json body = json::array({{{"kind", "Linear"}}, {{"kind", "ReLU"}}, {{"kind", "Linear"}}, {{"kind", "ReLU"}}});
    json blocks = json::array();
    blocks.push_back({{"kind", "Linear"}});
    blocks.push_back({{"kind", "ReLU"}});
    blocks.push_back({{"kind", "Residual"}, {"body", body}, {"repeat", 8}});
    blocks.push_back({{"kind", "Linear"}});
    auto d = nh::orders_from_json(blocks);
    CHECK(d.m_param == 18);
    CHECK(d.m_input == 1);
  }

  TEST_CASE("a near-M certificate lifts to M + 1 with p + integral(q)") {
    // |<grad f, theta> - (M+1) f| <= p'(|theta|) + |f| <= (p + int q)'(|theta|).
    nh::NetworkModel m = nh::network_from_json(relu_mlp(2, 3));
    nh::Dataset data;
    data.X = nh::Mat::Random(5, 3) * 0.5;
    data.y = nh::Vec::Ones(5);
    auto env = nh::scalar_envelope(m.order(), data.max_norm());
    CHECK(nh::verify_near_homogeneity(m, data, 2, env.p, env.q, 200, 2.0, 1).ok());
    nh::NonnegPoly lifted = env.p + env.q.integral();
    CHECK(lifted.degree() <= 3);
    CHECK(nh::verify_near_homogeneity(m, data, 3, lifted, env.q, 200, 2.0, 1).ok());
  }

  TEST_CASE("exactly homogeneous model: Euler residual vanishes with p = 0") {
    nh::NetworkModel m = nh::network_from_json(json::parse(
        R"({"input_dim": 3, "blocks": [{"kind": "Linear", "out": 4, "bias": false}, {"kind": "ReLU"},
            {"kind": "Linear", "out": 1, "bias": false}]})"));
    nh::Dataset data;
    data.X = nh::Mat::Random(6, 3);
    data.y = nh::Vec::Ones(6);
    auto env = nh::scalar_envelope(m.order(), data.max_norm());
    CHECK(env.p.is_zero());
    auto r = nh::verify_near_homogeneity(m, data, 2, nh::NonnegPoly(), env.q, 200, 3.0, 5);
    CHECK(r.ok());
    CHECK(r.max_a1 <= 1e-12);
  }

  TEST_CASE("linear model f = w.x with p = 0") {
    nh::NetworkModel m = nh::network_from_json(
        json::parse(R"({"input_dim": 2, "blocks": [{"kind": "Linear", "out": 1, "bias": false}]})"));
    nh::Dataset data;
    data.X = nh::Mat::Random(4, 2);
    data.y = nh::Vec::Ones(4);
    auto r = nh::verify_near_homogeneity(m, data, 1, nh::NonnegPoly(), nh::NonnegPoly({0.0, 2.0}), 100, 2.0, 2);
    CHECK(r.max_a1 <= 1e-14);
    CHECK(r.ok());
  }

  TEST_CASE("power counter-example family verifies with p = x^M") {
    for (int M : {2, 3, 4}) {
      json j = {{"input_dim", 1}, {"blocks", json::array({{{"kind", "PowerCounterexample"}, {"M", M}}})}};
      nh::NetworkModel m = nh::network_from_json(j);
      nh::Dataset data;
      data.X = nh::Mat::Ones(1, 1);
      data.y = nh::Vec::Ones(1);
      auto env = nh::scalar_envelope(m.order(), 1.0);
      CHECK(env.p == nh::NonnegPoly::monomial(M));
      auto r = nh::verify_near_homogeneity(m, data, M, env.p, env.q, 500, 3.0, 9);
      CHECK(r.ok());
      CHECK(r.max_a1 <= 1e-9);
    }
  }

  TEST_CASE("deep ReLU MLP with catalog envelopes over 1000 samples") {
    for (int L : {2, 3, 4}) {
      nh::NetworkModel m = nh::network_from_json(relu_mlp(L, 3));
      nh::Dataset data;
      std::mt19937_64 rng(L);
      data.X.resize(4, 3);
      for (int i = 0; i < 4; ++i) data.X.row(i) = nh::sample_in_ball(rng, 3, 1.0).transpose();
      data.y = nh::Vec::Ones(4);
      auto env = nh::scalar_envelope(m.order(), data.max_norm());
      auto r = nh::verify_near_homogeneity(m, data, L, env.p, env.q, 1000, 2.0, 17, 4);
      CHECK(r.samples == 1000);
      CHECK(r.ok());
    }
  }

  TEST_CASE("verifier is deterministic across thread counts") {
    nh::NetworkModel m = nh::network_from_json(relu_mlp(3, 3));
    nh::Dataset data;
    data.X = nh::Mat::Constant(2, 3, 0.3);
    data.y = nh::Vec::Ones(2);
    auto env = nh::scalar_envelope(m.order(), data.max_norm());
    auto a = nh::verify_near_homogeneity(m, data, 3, env.p, env.q, 64, 2.0, 4, 1);
    auto b = nh::verify_near_homogeneity(m, data, 3, env.p, env.q, 64, 2.0, 4, 3);
    CHECK(a.max_a1 == b.max_a1);
    CHECK(a.max_a2 == b.max_a2);
    CHECK(a.max_a3 == b.max_a3);
  }

  TEST_CASE("dual verifier on catalog blocks") {
    struct Case {
      std::string name;
      std::unique_ptr<nh::Block> block;
    };
    std::vector<Case> cases;
    cases.push_back({"linear", nh::make_linear(3, 2)});
    cases.push_back({"linear_nobias", nh::make_linear(3, 2, false)});
    cases.push_back({"relu2", nh::make_perceptron_pow(3, 2, 2)});
    cases.push_back({"leaky3", nh::make_perceptron_pow(2, 2, 3, nh::Activation::kLeakyRelu, 0.3)});
    cases.push_back({"relu", nh::make_activation(3, nh::Activation::kRelu)});
    cases.push_back({"swish", nh::make_activation(3, nh::Activation::kSwish, 0.5, 1.5)});
    cases.push_back({"maxpool", nh::make_pooling(4, 2, true)});
    cases.push_back({"avgpool", nh::make_pooling(4, 2, false)});
    cases.push_back({"conv", nh::make_conv(4, {0.5, -1.0, 0.25})});
    cases.push_back({"residual", nh::make_residual_identity(3)});
    cases.push_back({"swiglu", nh::make_swiglu(2, 2)});
    cases.push_back({"linear_attention", nh::make_linear_attention(2, 2)});
    cases.push_back({"relu_attention", nh::make_relu_attention(2, 2)});
    for (auto& c : cases) {
      CAPTURE(c.name);
      auto r = nh::verify_dual_homogeneity(*c.block, c.block->order(), 200, 2.0, 2.0, 23);
      CHECK(r.ok());
    }
  }

  TEST_CASE("pass-through has zero input residual") {
    auto id = nh::make_residual_identity(3);
    auto r = nh::verify_dual_homogeneity(*id, id->order(), 50, 1.0, 3.0, 3);
    CHECK(r.max_b1_input <= 1e-14);
  }

  TEST_CASE("descriptor json round trip") {
    auto d = nh::catalog_order(kind(nh::BlockTag::kLinear, 2, 3));
    json j = d;
    auto back = j.get<OrderDescriptor>();
    CHECK(back.m_param == 1);
    CHECK(back.env_t == d.env_t);
  }
}
