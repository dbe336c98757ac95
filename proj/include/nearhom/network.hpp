#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "nearhom/orders.hpp"

namespace nh {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// One block s(theta_s; x). Jacobian actions are hand-derived; at activation kinks the
/// right derivative is used.
class Block {
 public:
  virtual ~Block() = default;
  virtual std::string name() const = 0;
  virtual int in_dim() const = 0;
  virtual int out_dim() const = 0;
  virtual int param_dim() const = 0;
  virtual Vec forward(const double* theta, const Vec& x) const = 0;
  /// Pull back the output cotangent g: adds g^T ds/dtheta into gtheta, returns g^T ds/dx.
  virtual Vec backward(const double* theta, const Vec& x, const Vec& g, double* gtheta) const = 0;
  virtual OrderDescriptor order() const = 0;
  /// Distance of any kink argument from its kink; +inf for smooth blocks.
  virtual double kink_distance(const double* /*theta*/, const Vec& /*x*/) const {
    return std::numeric_limits<double>::infinity();
  }
};

std::unique_ptr<Block> make_linear(int in, int out, bool bias = true);
std::unique_ptr<Block> make_perceptron_pow(int in, int out, int k, Activation act = Activation::kRelu,
                                           double alpha = 0.5);
std::unique_ptr<Block> make_activation(int dim, Activation act, double alpha = 0.5, double beta = 1.0);
std::unique_ptr<Block> make_pooling(int dim, int window, bool max_pool);
std::unique_ptr<Block> make_conv(int dim, std::vector<double> kernel);
/// y = x + body(x); an empty body is the identity.
std::unique_ptr<Block> make_residual(std::vector<std::unique_ptr<Block>> body);
std::unique_ptr<Block> make_residual_identity(int dim);
std::unique_ptr<Block> make_swiglu(int in, int out, double beta = 1.0);
std::unique_ptr<Block> make_linear_attention(int d, int tokens);
std::unique_ptr<Block> make_relu_attention(int d, int tokens);
/// f(theta) = theta^M + M |theta|^{M-1}, independent of x.
std::unique_ptr<Block> make_power_counterexample(int in, int M);
/// f = w1.x + w2.x + a1 phi(w1.x) - a2 phi(-w2.x) with leaky slope alpha; theta = (w1, w2, a1, a2).
std::unique_ptr<Block> make_toy_two_layer(int d, double alpha);

/// Network f(theta; x) with blocks stored in application order (first block sees x).
class NetworkModel {
 public:
  NetworkModel(int input_dim, std::vector<std::unique_ptr<Block>> blocks);
  NetworkModel(NetworkModel&&) = default;
  NetworkModel& operator=(NetworkModel&&) = default;

  int input_dim() const { return input_dim_; }
  int dim() const { return total_dim_; }
  const std::vector<std::unique_ptr<Block>>& blocks() const { return blocks_; }
  int param_offset(std::size_t block) const { return offsets_[block]; }

  double forward(const Vec& theta, const Vec& x) const;
  /// Returns f and writes df/dtheta.
  double grad_params(const Vec& theta, const Vec& x, Vec& grad) const;
  Vec grad_params(const Vec& theta, const Vec& x) const;
  Vec grad_input(const Vec& theta, const Vec& x) const;
  double kink_distance(const Vec& theta, const Vec& x) const;

  /// Composed certificate (orders plus envelopes).
  OrderDescriptor order() const;
  /// True when (grad f)_M exists as a radial limit for every block; declared, not derived.
  bool weak_homogeneous_gradient = true;
  nlohmann::json description;

 private:
  int input_dim_;
  int total_dim_ = 0;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::vector<int> offsets_;
};

/// Build from {"input_dim": d, "blocks": [...]}; each block's input size is the previous output.
NetworkModel network_from_json(const nlohmann::json& j);

struct Dataset {
  Mat X;  ///< n x d, one sample per row
  Vec y;  ///< labels in {-1, +1}
  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }
  double max_norm() const;
  void validate() const;
};

Dataset dataset_from_csv(const std::string& path);
void dataset_to_csv(const Dataset& data, const std::string& path);

struct LossEval {
  double loss = 0.0;      ///< exp(log_loss); may underflow to 0
  double log_loss = 0.0;  ///< LSE(-margins) - log n
  Vec margins;            ///< y_i f(theta; x_i)
  double min_margin = 0.0;
  Vec weights;            ///< softmax weights e^{-margin_i} / (n L), sum to 1
};

double log_sum_exp(const Vec& v);
LossEval loss(const NetworkModel& model, const Vec& theta, const Dataset& data);
/// grad L = -L sum_i w_i y_i grad f_i. Returns the gradient and fills `eval`.
Vec loss_grad(const NetworkModel& model, const Vec& theta, const Dataset& data, LossEval* eval = nullptr);
/// sum_i w_i y_i grad f_i, the direction of -grad L that never underflows.
Vec loss_grad_direction(const NetworkModel& model, const Vec& theta, const Dataset& data, LossEval* eval = nullptr);

struct HessianProbe {
  double max_ratio = 0.0;  ///< max |d^2 f / du^2| / (A (||theta||^{M-2} + 1)); A alone when M = 1
  int probes = 0;
};
HessianProbe hessian_bound_probe(const NetworkModel& model, const Vec& theta, const Dataset& data, int directions,
                                 double A, int M, unsigned long long seed = 0);

}  // namespace nh
