#include "nearhom/orders.hpp"

#include <cmath>

#include "nearhom/errors.hpp"

namespace nh {

namespace {

using P = NonnegPoly;

P x_pow(int k, double c = 1.0) { return P::monomial(k, c); }
P one_plus_x_pow(int k) {
  P base({1.0, 1.0});
  P acc = P::constant(1.0);
  for (int i = 0; i < k; ++i) acc = acc * base;
  return acc;
}
P hat(const P& g) { return g.submultiplicative(); }

// Bound pieces: p' r >= P1 R1, p r' >= P2 R2, q' t >= Q1 T1, q t' >= Q2 T2, q t >= Q3 T3.
struct Pieces {
  P P1, R1, P2, R2, Q1, T1, Q2, T2, Q3, T3;
};

OrderDescriptor assemble(int m, int n, const Pieces& k) {
  OrderDescriptor d;
  d.m_param = m;
  d.m_input = n;
  d.env_p = k.P1.integral() + k.P2;
  d.env_r = k.R1 + k.R2.integral();
  d.env_q = k.Q1.integral() + k.Q2 + k.Q3;
  d.env_t = k.T1 + k.T2.integral() + k.T3;
  d.validate();
  return d;
}

OrderDescriptor identity_block() {
  OrderDescriptor d;
  d.m_param = 0;
  d.m_input = 1;
  d.env_q = P::constant(1.0);
  d.env_t = x_pow(1);
  return d;
}

OrderDescriptor linear_block(int d1, int d2, bool bias = true) {
  OrderDescriptor d;
  d.m_param = 1;
  d.m_input = 1;
  if (bias) {
    d.env_p = x_pow(1);
    d.env_r = x_pow(1);
  }
  d.env_q = x_pow(1);
  d.env_t = P({std::sqrt(static_cast<double>(d1)), std::sqrt(static_cast<double>(d2))});
  return d;
}

// max_y y^2 s(y)(1 - s(y)) for the logistic s, rounded up; bounds |swish'(z) z - swish(z)| * beta.
constexpr double kSwishEulerBound = 0.44;
// sup |d swish/dz|, rounded up.
constexpr double kSwishSlopeBound = 1.1;

OrderDescriptor activation_block(const BlockKind& k) {
  OrderDescriptor d = identity_block();
  if (k.activation == Activation::kSwish) {
    double c = kSwishEulerBound * std::sqrt(static_cast<double>(k.out_dim)) / k.swish_beta;
    d.env_p = P::constant(1.0);
    d.env_r = x_pow(1, c);
    d.env_t = x_pow(1, kSwishSlopeBound);
  }
  return d;
}

}  // namespace

void OrderDescriptor::validate() const {
  require(m_param >= 0 && m_input >= 0, ErrorCode::kInvalidArgument, "orders must be nonnegative");
  require(m_param + m_input >= 1, ErrorCode::kInvalidArgument, "near-homogeneity needs M + N >= 1");
  require(env_p.degree() <= m_param && env_q.degree() <= m_param, ErrorCode::kInvalidArgument,
          "parameter envelope exceeds its degree budget");
  require(env_r.degree() <= m_input && env_t.degree() <= m_input, ErrorCode::kInvalidArgument,
          "input envelope exceeds its degree budget");
}

std::string tag_name(BlockTag tag) {
  switch (tag) {
    case BlockTag::kLinear: return "Linear";
    case BlockTag::kPerceptronPow: return "PerceptronPow";
    case BlockTag::kActivation: return "Activation";
    case BlockTag::kPooling: return "Pooling";
    case BlockTag::kConv: return "Conv";
    case BlockTag::kResidual: return "Residual";
    case BlockTag::kSwiGLU: return "SwiGLU";
    case BlockTag::kLinearAttention: return "LinearAttention";
    case BlockTag::kReluAttention: return "ReluAttention";
  }
  return "?";
}

BlockTag tag_from_name(const std::string& name) {
  for (BlockTag t : {BlockTag::kLinear, BlockTag::kPerceptronPow, BlockTag::kActivation,
                     BlockTag::kPooling, BlockTag::kConv, BlockTag::kResidual, BlockTag::kSwiGLU,
                     BlockTag::kLinearAttention, BlockTag::kReluAttention})
    if (tag_name(t) == name) return t;
  if (name == "ReLU" || name == "LeakyReLU" || name == "Swish") return BlockTag::kActivation;
  if (name == "MaxPool" || name == "AvgPool") return BlockTag::kPooling;
  fail(ErrorCode::kInvalidArgument, "unknown block kind '" + name + "'");
}

OrderDescriptor catalog_order(const BlockKind& k) {
  switch (k.tag) {
    case BlockTag::kLinear:
      return linear_block(k.in_dim, k.out_dim, k.bias);
    case BlockTag::kPerceptronPow: {
      require(k.power >= 1, ErrorCode::kInvalidArgument, "perceptron power must be >= 1");
      require(k.activation != Activation::kSwish, ErrorCode::kInvalidArgument,
              "PerceptronPow supports ReLU and leaky ReLU");
      OrderDescriptor d;
      d.m_param = d.m_input = k.power;
      d.env_p = d.env_q = x_pow(k.power);
      d.env_r = d.env_t = one_plus_x_pow(k.power);
      return d;
    }
    case BlockTag::kActivation:
      return activation_block(k);
    case BlockTag::kPooling:
    case BlockTag::kResidual:
      return identity_block();
    case BlockTag::kConv: {
      OrderDescriptor d = identity_block();
      d.env_t = x_pow(1, std::max(k.kernel_l1, 0.0));
      return d;
    }
    case BlockTag::kSwiGLU: {
      BlockKind act;
      act.tag = BlockTag::kActivation;
      act.activation = Activation::kSwish;
      act.out_dim = k.out_dim;
      act.swish_beta = k.swish_beta;
      OrderDescriptor gate = compose_orders(activation_block(act), linear_block(k.in_dim, k.out_dim));
      return tensor_orders(gate, linear_block(k.in_dim, k.out_dim));
    }
    case BlockTag::kLinearAttention: {
      OrderDescriptor core;
      core.m_param = 2;
      core.m_input = 3;
      core.env_q = x_pow(2, 1.0 / k.tokens);
      core.env_t = x_pow(3);
      return sum_orders(identity_block(), core);
    }
    case BlockTag::kReluAttention: {
      double s = 1.0 / (std::sqrt(static_cast<double>(k.model_dim)) * k.tokens);
      OrderDescriptor core;
      core.m_param = 4;
      core.m_input = 3;
      core.env_q = x_pow(4, s);
      core.env_t = x_pow(3);
      return sum_orders(identity_block(), core);
    }
  }
  fail(ErrorCode::kInvalidArgument, "unknown block kind");
}

OrderDescriptor compose_orders(const OrderDescriptor& o, const OrderDescriptor& i) {
  o.validate();
  i.validate();
  const int M1 = o.m_param, M2 = o.m_input, M3 = i.m_param, M4 = i.m_input;
  const P &p1 = o.env_p, &q1 = o.env_q, &r1 = o.env_r, &t1 = o.env_t;
  const P &p2 = i.env_p, &q2 = i.env_q, &r2 = i.env_r, &t2 = i.env_t;
  // Outer envelopes evaluated at ||inner output|| <= q2(u) t2(v), split into u- and v-factors.
  P rq = hat(r1).compose(q2), rt = hat(r1).compose(t2);
  P drq = hat(r1.derivative()).compose(q2), drt = hat(r1.derivative()).compose(t2);
  P tq = hat(t1).compose(q2), tt = hat(t1).compose(t2);
  P dtq = hat(t1.derivative()).compose(q2), dtt = hat(t1.derivative()).compose(t2);

  Pieces k;
  k.P1 = p1.derivative() * rq + p1 * drq * static_cast<double>(M3) + q1 * dtq * p2.derivative();
  k.R1 = rt + drt * static_cast<double>(M3) + dtt * r2;
  k.P2 = p1 * drq * static_cast<double>(M4) + q1 * dtq * p2;
  k.R2 = drt + dtt * r2.derivative();
  k.Q1 = q1.derivative() * tq + q1 * dtq * q2.derivative();
  k.T1 = tt + dtt * t2;
  k.Q2 = q1 * dtq * q2;
  k.T2 = dtt * t2.derivative();
  k.Q3 = q1 * tq;
  k.T3 = tt;
  return assemble(M1 + M2 * M3, M2 * M4, k);
}

OrderDescriptor tensor_orders(const OrderDescriptor& a, const OrderDescriptor& b) {
  a.validate();
  b.validate();
  const P &p1 = a.env_p, &q1 = a.env_q, &r1 = a.env_r, &t1 = a.env_t;
  const P &p2 = b.env_p, &q2 = b.env_q, &r2 = b.env_r, &t2 = b.env_t;
  Pieces k;
  k.P1 = p1.derivative() * q2 + q1 * p2.derivative();
  k.R1 = r1 * t2 + t1 * r2;
  k.P2 = p1 * q2 + q1 * p2;
  k.R2 = r1.derivative() * t2 + t1 * r2.derivative();
  k.Q1 = q1.derivative() * q2 + q1 * q2.derivative();
  k.T1 = t1 * t2;
  k.Q2 = q1 * q2;
  k.T2 = t1.derivative() * t2 + t1 * t2.derivative();
  k.Q3 = q1 * q2;
  k.T3 = t1 * t2;
  return assemble(a.m_param + b.m_param, a.m_input + b.m_input, k);
}

OrderDescriptor sum_orders(const OrderDescriptor& a, const OrderDescriptor& b) {
  a.validate();
  b.validate();
  const int M = std::max(a.m_param, b.m_param), N = std::max(a.m_input, b.m_input);
  Pieces k;
  // Lower-order summands add |M - M_i| ||s_i|| to the Euler residual.
  k.P1 = a.env_p.derivative() + b.env_p.derivative();
  k.R1 = a.env_r + b.env_r;
  k.P2 = a.env_p + b.env_p;
  k.R2 = a.env_r.derivative() + b.env_r.derivative();
  for (const OrderDescriptor* s : {&a, &b}) {
    if (M > s->m_param) {
      k.P1 = k.P1 + s->env_q * static_cast<double>(M - s->m_param);
      k.R1 = k.R1 + s->env_t;
    }
    if (N > s->m_input) {
      k.P2 = k.P2 + s->env_q;
      k.R2 = k.R2 + s->env_t * static_cast<double>(N - s->m_input);
    }
  }
  k.Q1 = a.env_q.derivative() + b.env_q.derivative();
  k.T1 = a.env_t + b.env_t;
  k.Q2 = a.env_q + b.env_q;
  k.T2 = a.env_t.derivative() + b.env_t.derivative();
  k.Q3 = a.env_q + b.env_q;
  k.T3 = a.env_t + b.env_t;
  return assemble(M, N, k);
}

OrderDescriptor linear_map_order(const OrderDescriptor& a, double op_norm) {
  require(op_norm >= 0.0, ErrorCode::kInvalidArgument, "operator norm bound must be nonnegative");
  OrderDescriptor d = a;
  d.env_p = a.env_p * op_norm;
  d.env_q = a.env_q * op_norm;
  return d;
}

OrderDescriptor network_order(const std::vector<OrderDescriptor>& blocks) {
  require(!blocks.empty(), ErrorCode::kInvalidArgument, "network needs at least one block");
  long long m1 = 0, prod = 1;
  for (const auto& b : blocks) {
    m1 += b.m_param * prod;
    prod *= b.m_input;
  }
  OrderDescriptor acc = blocks.back();
  for (std::size_t j = blocks.size() - 1; j-- > 0;) acc = compose_orders(blocks[j], acc);
  require(acc.m_param == m1 && acc.m_input == prod, ErrorCode::kNumerical,
          "composition fold disagrees with the closed-form order");
  return acc;
}

BlockKind block_kind_from_json(const nlohmann::json& j) {
  BlockKind k;
  std::string name = j.at("kind").get<std::string>();
  k.tag = tag_from_name(name);
  std::string act = j.value("activation", name == "LeakyReLU" ? "leaky_relu"
                                          : name == "Swish"   ? "swish"
                                                              : "relu");
  if (act == "relu") k.activation = Activation::kRelu;
  else if (act == "leaky_relu") k.activation = Activation::kLeakyRelu;
  else if (act == "swish") k.activation = Activation::kSwish;
  else fail(ErrorCode::kInvalidArgument, "unknown activation '" + act + "'");
  k.power = j.value("k", 1);
  int dim = j.value("dim", 1);
  k.in_dim = j.value("in", dim);
  k.out_dim = j.value("out", dim);
  k.alpha = j.value("alpha", 0.5);
  k.swish_beta = j.value("beta", 1.0);
  k.tokens = j.value("tokens", 1);
  k.model_dim = j.value("model_dim", 1);
  k.bias = j.value("bias", true);
  if (j.contains("kernel")) {
    double l1 = 0.0;
    for (double w : j.at("kernel").get<std::vector<double>>()) l1 += std::abs(w);
    k.kernel_l1 = l1;
  } else {
    k.kernel_l1 = j.value("kernel_l1", 1.0);
  }
  return k;
}

namespace {

OrderDescriptor reduce_list(const nlohmann::json& list);

OrderDescriptor item_order(const nlohmann::json& j) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "Residual" && j.contains("body")) return sum_orders(reduce_list(j.at("body")), identity_block());
  if (kind == "Sum" || kind == "Tensor") {
    const auto& parts = j.at(kind == "Sum" ? "terms" : "factors");
    require(parts.is_array() && !parts.empty(), ErrorCode::kInvalidArgument, kind + " needs a nonempty list");
    OrderDescriptor acc = reduce_list(parts.at(0));
    for (std::size_t i = 1; i < parts.size(); ++i)
      acc = kind == "Sum" ? sum_orders(acc, reduce_list(parts[i])) : tensor_orders(acc, reduce_list(parts[i]));
    return acc;
  }
  if (kind == "LinearMap") return linear_map_order(reduce_list(j.at("body")), j.value("norm", 1.0));
  return catalog_order(block_kind_from_json(j));
}

// Application order in the JSON list; the calculus wants outermost first.
OrderDescriptor reduce_list(const nlohmann::json& list) {
  require(list.is_array() && !list.empty(), ErrorCode::kInvalidArgument, "block list must be a nonempty array");
  std::vector<OrderDescriptor> outer_first;
  for (auto it = list.rbegin(); it != list.rend(); ++it) {
    int repeat = it->value("repeat", 1);
    require(repeat >= 1, ErrorCode::kInvalidArgument, "repeat must be >= 1");
    OrderDescriptor d = item_order(*it);
    for (int r = 0; r < repeat; ++r) outer_first.push_back(d);
  }
  return network_order(outer_first);
}

}  // namespace

OrderDescriptor orders_from_json(const nlohmann::json& spec) {
  if (spec.is_object() && spec.contains("blocks")) return reduce_list(spec.at("blocks"));
  return reduce_list(spec);
}

ScalarEnvelope scalar_envelope(const OrderDescriptor& d, double x_max) {
  require(x_max >= 0.0, ErrorCode::kInvalidArgument, "input radius must be nonnegative");
  ScalarEnvelope e;
  e.M = d.m_param;
  e.p = d.env_p * d.env_r(x_max);
  e.q = d.env_q * d.env_t(x_max);
  return e;
}

void to_json(nlohmann::json& j, const OrderDescriptor& d) {
  j = nlohmann::json{{"m_param", d.m_param}, {"m_input", d.m_input}, {"env_p", d.env_p},
                     {"env_q", d.env_q},     {"env_r", d.env_r},     {"env_t", d.env_t}};
}

void from_json(const nlohmann::json& j, OrderDescriptor& d) {
  d.m_param = j.at("m_param").get<int>();
  d.m_input = j.at("m_input").get<int>();
  d.env_p = j.value("env_p", NonnegPoly{});
  d.env_q = j.value("env_q", NonnegPoly{});
  d.env_r = j.value("env_r", NonnegPoly{});
  d.env_t = j.value("env_t", NonnegPoly{});
  d.validate();
}

}  // namespace nh
