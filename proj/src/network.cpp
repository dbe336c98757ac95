#include "nearhom/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "nearhom/errors.hpp"

namespace nh {

NetworkModel::NetworkModel(int input_dim, std::vector<std::unique_ptr<Block>> blocks)
    : input_dim_(input_dim), blocks_(std::move(blocks)) {
  require(input_dim >= 1, ErrorCode::kInvalidArgument, "input dimension must be positive");
  require(!blocks_.empty(), ErrorCode::kInvalidArgument, "network needs at least one block");
  int width = input_dim;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    require(blocks_[i]->in_dim() == width, ErrorCode::kDimensionMismatch,
            "block " + std::to_string(i) + " (" + blocks_[i]->name() + ") expects input size " +
                std::to_string(blocks_[i]->in_dim()) + ", got " + std::to_string(width));
    width = blocks_[i]->out_dim();
    offsets_.push_back(total_dim_);
    total_dim_ += blocks_[i]->param_dim();
  }
  require(width == 1, ErrorCode::kDimensionMismatch, "network output must be scalar");
}

double NetworkModel::forward(const Vec& theta, const Vec& x) const {
  require(theta.size() == total_dim_, ErrorCode::kDimensionMismatch, "parameter vector has the wrong size");
  require(x.size() == input_dim_, ErrorCode::kDimensionMismatch, "input vector has the wrong size");
  Vec h = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) h = blocks_[i]->forward(theta.data() + offsets_[i], h);
  return h[0];
}

double NetworkModel::grad_params(const Vec& theta, const Vec& x, Vec& grad) const {
  require(theta.size() == total_dim_, ErrorCode::kDimensionMismatch, "parameter vector has the wrong size");
  require(x.size() == input_dim_, ErrorCode::kDimensionMismatch, "input vector has the wrong size");
  std::vector<Vec> ins{x};
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    ins.push_back(blocks_[i]->forward(theta.data() + offsets_[i], ins.back()));
  grad = Vec::Zero(total_dim_);
  Vec g = Vec::Ones(1);
  for (std::size_t i = blocks_.size(); i-- > 0;)
    g = blocks_[i]->backward(theta.data() + offsets_[i], ins[i], g, grad.data() + offsets_[i]);
  return ins.back()[0];
}

Vec NetworkModel::grad_params(const Vec& theta, const Vec& x) const {
  Vec g;
  grad_params(theta, x, g);
  return g;
}

Vec NetworkModel::grad_input(const Vec& theta, const Vec& x) const {
  Vec scratch;
  std::vector<Vec> ins{x};
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    ins.push_back(blocks_[i]->forward(theta.data() + offsets_[i], ins.back()));
  scratch = Vec::Zero(total_dim_);
  Vec g = Vec::Ones(1);
  for (std::size_t i = blocks_.size(); i-- > 0;)
    g = blocks_[i]->backward(theta.data() + offsets_[i], ins[i], g, scratch.data() + offsets_[i]);
  return g;
}

double NetworkModel::kink_distance(const Vec& theta, const Vec& x) const {
  double k = std::numeric_limits<double>::infinity();
  Vec h = x;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    k = std::min(k, blocks_[i]->kink_distance(theta.data() + offsets_[i], h));
    h = blocks_[i]->forward(theta.data() + offsets_[i], h);
  }
  return k;
}

OrderDescriptor NetworkModel::order() const {
  std::vector<OrderDescriptor> outer_first;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) outer_first.push_back((*it)->order());
  return network_order(outer_first);
}

namespace {

Activation activation_of(const nlohmann::json& j, const std::string& kind) {
  std::string def = kind == "LeakyReLU" ? "leaky_relu" : kind == "Swish" ? "swish" : "relu";
  std::string a = j.value("activation", def);
  if (a == "relu") return Activation::kRelu;
  if (a == "leaky_relu") return Activation::kLeakyRelu;
  if (a == "swish") return Activation::kSwish;
  fail(ErrorCode::kInvalidArgument, "unknown activation '" + a + "'");
}

std::vector<std::unique_ptr<Block>> build_list(const nlohmann::json& list, int& width);

std::unique_ptr<Block> build_block(const nlohmann::json& j, int width) {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "Linear") return make_linear(width, j.value("out", width), j.value("bias", true));
  if (kind == "PerceptronPow")
    return make_perceptron_pow(width, j.value("out", width), j.value("k", 1), activation_of(j, kind),
                               j.value("alpha", 0.5));
  if (kind == "ReLU" || kind == "LeakyReLU" || kind == "Swish" || kind == "Activation")
    return make_activation(width, activation_of(j, kind), j.value("alpha", 0.5), j.value("beta", 1.0));
  if (kind == "MaxPool" || kind == "AvgPool" || kind == "Pooling")
    return make_pooling(width, j.value("window", 2), kind == "MaxPool" || j.value("max", false));
  if (kind == "Conv") return make_conv(width, j.at("kernel").get<std::vector<double>>());
  if (kind == "Residual") {
    if (!j.contains("body")) return make_residual_identity(width);
    int w = width;
    auto body = build_list(j.at("body"), w);
    require(w == width, ErrorCode::kDimensionMismatch, "residual body must preserve the feature size");
    return make_residual(std::move(body));
  }
  if (kind == "SwiGLU") return make_swiglu(width, j.value("out", width), j.value("beta", 1.0));
  if (kind == "LinearAttention" || kind == "ReluAttention") {
    int d = j.at("model_dim").get<int>();
    int L = j.at("tokens").get<int>();
    require(d * L == width, ErrorCode::kDimensionMismatch, kind + " expects input size model_dim * tokens");
    return kind == "LinearAttention" ? make_linear_attention(d, L) : make_relu_attention(d, L);
  }
  if (kind == "PowerCounterexample") return make_power_counterexample(width, j.value("M", 3));
  if (kind == "ToyTwoLayer") return make_toy_two_layer(width, j.value("alpha", 0.5));
  fail(ErrorCode::kInvalidArgument, "unknown block kind '" + kind + "'");
}

std::vector<std::unique_ptr<Block>> build_list(const nlohmann::json& list, int& width) {
  require(list.is_array(), ErrorCode::kInvalidArgument, "block list must be an array");
  std::vector<std::unique_ptr<Block>> out;
  for (const auto& item : list) {
    int repeat = item.value("repeat", 1);
    require(repeat >= 1, ErrorCode::kInvalidArgument, "repeat must be >= 1");
    for (int r = 0; r < repeat; ++r) {
      out.push_back(build_block(item, width));
      width = out.back()->out_dim();
    }
  }
  return out;
}

}  // namespace

NetworkModel network_from_json(const nlohmann::json& j) {
  int d = j.at("input_dim").get<int>();
  int width = d;
  NetworkModel m(d, build_list(j.at("blocks"), width));
  m.weak_homogeneous_gradient = j.value("weak_homogeneous_gradient", true);
  m.description = j;
  return m;
}

double Dataset::max_norm() const {
  double m = 0.0;
  for (int i = 0; i < n(); ++i) m = std::max(m, X.row(i).norm());
  return m;
}

void Dataset::validate() const {
  require(n() >= 1, ErrorCode::kInvalidArgument, "dataset must contain at least one sample");
  require(y.size() == X.rows(), ErrorCode::kDimensionMismatch, "label count differs from sample count");
  for (int i = 0; i < n(); ++i)
    require(y[i] == 1.0 || y[i] == -1.0, ErrorCode::kInvalidArgument, "labels must be +1 or -1");
  require(X.allFinite(), ErrorCode::kNumerical, "dataset contains non-finite values");
}

Dataset dataset_from_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open dataset '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kIo, "dataset '" + path + "' is empty");
  int cols = 1;
  for (char c : line) cols += c == ',';
  require(cols >= 2, ErrorCode::kInvalidArgument, "dataset needs columns x1..xd,y");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::kInvalidArgument, "bad number '" + cell + "' in '" + path + "'");
      }
    }
    require(static_cast<int>(row.size()) == cols, ErrorCode::kDimensionMismatch,
            "ragged row in dataset '" + path + "'");
    rows.push_back(std::move(row));
  }
  Dataset data;
  data.X.resize(static_cast<Eigen::Index>(rows.size()), cols - 1);
  data.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int k = 0; k < cols - 1; ++k) data.X(static_cast<Eigen::Index>(i), k) = rows[i][k];
    data.y[static_cast<Eigen::Index>(i)] = rows[i][cols - 1];
  }
  data.validate();
  return data;
}

void dataset_to_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write dataset '" + path + "'");
  out.precision(17);
  for (int k = 0; k < data.d(); ++k) out << 'x' << k + 1 << ',';
  out << "y\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int k = 0; k < data.d(); ++k) out << data.X(i, k) << ',';
    out << data.y[i] << '\n';
  }
}

double log_sum_exp(const Vec& v) {
  require(v.size() > 0, ErrorCode::kInvalidArgument, "log-sum-exp of an empty vector");
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

LossEval loss(const NetworkModel& model, const Vec& theta, const Dataset& data) {
  LossEval e;
  e.margins.resize(data.n());
  for (int i = 0; i < data.n(); ++i) e.margins[i] = data.y[i] * model.forward(theta, data.X.row(i).transpose());
  require(e.margins.allFinite(), ErrorCode::kNumerical, "network output is not finite");
  Vec neg = -e.margins;
  double lse = log_sum_exp(neg);
  e.log_loss = lse - std::log(static_cast<double>(data.n()));
  e.loss = std::exp(e.log_loss);
  e.min_margin = e.margins.minCoeff();
  e.weights = (neg.array() - lse).exp();
  return e;
}

Vec loss_grad_direction(const NetworkModel& model, const Vec& theta, const Dataset& data, LossEval* eval) {
  LossEval e = loss(model, theta, data);
  Vec dir = Vec::Zero(model.dim());
  Vec g;
  // Fixed summation order keeps runs bit-reproducible.
  for (int i = 0; i < data.n(); ++i) {
    model.grad_params(theta, data.X.row(i).transpose(), g);
    dir += (e.weights[i] * data.y[i]) * g;
  }
  if (eval) *eval = std::move(e);
  return dir;
}

Vec loss_grad(const NetworkModel& model, const Vec& theta, const Dataset& data, LossEval* eval) {
  LossEval e;
  Vec dir = loss_grad_direction(model, theta, data, &e);
  Vec g = -e.loss * dir;
  if (eval) *eval = std::move(e);
  return g;
}

HessianProbe hessian_bound_probe(const NetworkModel& model, const Vec& theta, const Dataset& data, int directions,
                                 double A, int M, unsigned long long seed) {
  require(M >= 1, ErrorCode::kInvalidArgument, "order must be positive");
  require(A > 0.0, ErrorCode::kInvalidArgument, "Hessian constant must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double rho = theta.norm();
  double bound = M == 1 ? A : A * (std::pow(rho, M - 2) + 1.0);
  double h = 1e-5 * (1.0 + rho);
  HessianProbe out;
  Vec gp, gm;
  for (int k = 0; k < directions; ++k) {
    Vec u(model.dim());
    for (int i = 0; i < u.size(); ++i) u[i] = normal(rng);
    u.normalize();
    for (int i = 0; i < data.n(); ++i) {
      Vec x = data.X.row(i).transpose();
      model.grad_params(theta + h * u, x, gp);
      model.grad_params(theta - h * u, x, gm);
      double curv = std::abs(u.dot(gp - gm)) / (2.0 * h);
      out.max_ratio = std::max(out.max_ratio, curv / bound);
      ++out.probes;
    }
  }
  return out;
}

}  // namespace nh
