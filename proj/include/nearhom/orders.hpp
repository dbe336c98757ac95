#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nearhom/poly.hpp"

namespace nh {

/// Near-(M, N)-homogeneity certificate of a block: orders plus envelope polynomials.
/// p, q act on the parameter norm, r, t on the input norm. Envelopes bound the Euclidean
/// norm of the output and operator norms of the Jacobians.
struct OrderDescriptor {
  int m_param = 0;
  int m_input = 0;
  NonnegPoly env_p, env_q, env_r, env_t;

  /// Throws when M + N < 1 or an envelope exceeds its degree budget.
  void validate() const;
};

enum class BlockTag {
  kLinear,
  kPerceptronPow,
  kActivation,  // parameter-free pointwise activation, (0,1)
  kPooling,
  kConv,        // fixed-kernel convolution, (0,1)
  kResidual,    // identity pass-through, (0,1)
  kSwiGLU,
  kLinearAttention,
  kReluAttention,
};

enum class Activation { kRelu, kLeakyRelu, kSwish };

struct BlockKind {
  BlockTag tag = BlockTag::kLinear;
  Activation activation = Activation::kRelu;
  int power = 1;          // k for PerceptronPow
  int in_dim = 1;         // d1 (tokens count as d * L for attention blocks)
  int out_dim = 1;        // d2
  double alpha = 0.5;     // leaky slope
  double swish_beta = 1.0;
  double kernel_l1 = 1.0; // ||kernel||_1 for Conv
  int tokens = 1;         // context length L for attention blocks
  int model_dim = 1;      // token dimension d for attention blocks
  bool bias = true;       // Linear only; without it the block is exactly 1-homogeneous
};

std::string tag_name(BlockTag tag);
BlockTag tag_from_name(const std::string& name);

OrderDescriptor catalog_order(const BlockKind& kind);

OrderDescriptor compose_orders(const OrderDescriptor& outer, const OrderDescriptor& inner);
OrderDescriptor tensor_orders(const OrderDescriptor& a, const OrderDescriptor& b);
OrderDescriptor sum_orders(const OrderDescriptor& a, const OrderDescriptor& b);
/// Fixed linear map T with ||T|| <= op_norm applied after the block.
OrderDescriptor linear_map_order(const OrderDescriptor& a, double op_norm = 1.0);
/// Blocks listed outermost first. Orders follow the closed-form product/sum formula,
/// envelopes follow the left fold of compose_orders.
OrderDescriptor network_order(const std::vector<OrderDescriptor>& blocks_outer_first);

/// Parse a JSON block list (application order: outermost last) and reduce it to one
/// descriptor. Items: {"kind": ..., "repeat": n, ...}; "Residual" with a "body" list wraps
/// the body in a skip connection; "Sum"/"Tensor" take "terms"/"factors" lists of lists;
/// "LinearMap" takes "body" and "norm".
OrderDescriptor orders_from_json(const nlohmann::json& spec);
BlockKind block_kind_from_json(const nlohmann::json& j);

/// Network-level (p, q) from a descriptor for inputs with ||x|| <= x_max.
struct ScalarEnvelope {
  int M = 0;
  NonnegPoly p, q;
};
ScalarEnvelope scalar_envelope(const OrderDescriptor& d, double x_max);

void to_json(nlohmann::json& j, const OrderDescriptor& d);
void from_json(const nlohmann::json& j, OrderDescriptor& d);

}  // namespace nh
