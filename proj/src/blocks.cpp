#include <cmath>

#include "nearhom/errors.hpp"
#include "nearhom/network.hpp"

namespace nh {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;
// Token matrices H (d x L) travel as column-major flattened vectors.
using CTok = Eigen::Map<const Mat>;

double act_value(Activation a, double z, double alpha, double beta) {
  switch (a) {
    case Activation::kRelu: return z >= 0.0 ? z : 0.0;
    case Activation::kLeakyRelu: return z >= 0.0 ? z : alpha * z;
    case Activation::kSwish: return z / (1.0 + std::exp(-beta * z));
  }
  return 0.0;
}

double act_slope(Activation a, double z, double alpha, double beta) {
  switch (a) {
    case Activation::kRelu: return z >= 0.0 ? 1.0 : 0.0;
    case Activation::kLeakyRelu: return z >= 0.0 ? 1.0 : alpha;
    case Activation::kSwish: {
      double s = 1.0 / (1.0 + std::exp(-beta * z));
      return s + beta * z * s * (1.0 - s);
    }
  }
  return 0.0;
}

BlockKind kind_of(BlockTag tag, int in, int out) {
  BlockKind k;
  k.tag = tag;
  k.in_dim = in;
  k.out_dim = out;
  return k;
}

class LinearBlock final : public Block {
 public:
  LinearBlock(int in, int out, bool bias) : in_(in), out_(out), bias_(bias) {}
  std::string name() const override { return "Linear"; }
  int in_dim() const override { return in_; }
  int out_dim() const override { return out_; }
  int param_dim() const override { return out_ * in_ + (bias_ ? out_ : 0); }
  Vec forward(const double* th, const Vec& x) const override {
    Vec y = CMap(th, out_, in_) * x;
    if (bias_) y += Eigen::Map<const Vec>(th + out_ * in_, out_);
    return y;
  }
  Vec backward(const double* th, const Vec& x, const Vec& g, double* gt) const override {
    MMap(gt, out_, in_) += g * x.transpose();
    if (bias_) Eigen::Map<Vec>(gt + out_ * in_, out_) += g;
    return CMap(th, out_, in_).transpose() * g;
  }
  OrderDescriptor order() const override {
    BlockKind k = kind_of(BlockTag::kLinear, in_, out_);
    k.bias = bias_;
    return catalog_order(k);
  }

 private:
  int in_, out_;
  bool bias_;
};

class PerceptronPowBlock final : public Block {
 public:
  PerceptronPowBlock(int in, int out, int k, Activation act, double alpha)
      : in_(in), out_(out), k_(k), act_(act), alpha_(alpha) {
    require(k >= 1, ErrorCode::kInvalidArgument, "perceptron power must be >= 1");
    require(act != Activation::kSwish, ErrorCode::kInvalidArgument, "PerceptronPow supports ReLU and leaky ReLU");
  }
  std::string name() const override { return "PerceptronPow"; }
  int in_dim() const override { return in_; }
  int out_dim() const override { return out_; }
  int param_dim() const override { return out_ * in_ + out_; }
  Vec pre(const double* th, const Vec& x) const {
    return CMap(th, out_, in_) * x + Eigen::Map<const Vec>(th + out_ * in_, out_);
  }
  Vec forward(const double* th, const Vec& x) const override {
    Vec z = pre(th, x);
    for (int i = 0; i < out_; ++i) z[i] = std::pow(act_value(act_, z[i], alpha_, 1.0), k_);
    return z;
  }
  Vec backward(const double* th, const Vec& x, const Vec& g, double* gt) const override {
    Vec z = pre(th, x);
    Vec dz(out_);
    for (int i = 0; i < out_; ++i) {
      double a = act_value(act_, z[i], alpha_, 1.0);
      dz[i] = g[i] * k_ * std::pow(a, k_ - 1) * act_slope(act_, z[i], alpha_, 1.0);
    }
    MMap(gt, out_, in_) += dz * x.transpose();
    Eigen::Map<Vec>(gt + out_ * in_, out_) += dz;
    return CMap(th, out_, in_).transpose() * dz;
  }
  OrderDescriptor order() const override {
    BlockKind k = kind_of(BlockTag::kPerceptronPow, in_, out_);
    k.power = k_;
    k.activation = act_;
    return catalog_order(k);
  }
  double kink_distance(const double* th, const Vec& x) const override { return pre(th, x).cwiseAbs().minCoeff(); }

 private:
  int in_, out_, k_;
  Activation act_;
  double alpha_;
};

class ActivationBlock final : public Block {
 public:
  ActivationBlock(int dim, Activation act, double alpha, double beta)
      : dim_(dim), act_(act), alpha_(alpha), beta_(beta) {}
  std::string name() const override { return "Activation"; }
  int in_dim() const override { return dim_; }
  int out_dim() const override { return dim_; }
  int param_dim() const override { return 0; }
  Vec forward(const double*, const Vec& x) const override {
    Vec y(dim_);
    for (int i = 0; i < dim_; ++i) y[i] = act_value(act_, x[i], alpha_, beta_);
    return y;
  }
  Vec backward(const double*, const Vec& x, const Vec& g, double*) const override {
    Vec dx(dim_);
    for (int i = 0; i < dim_; ++i) dx[i] = g[i] * act_slope(act_, x[i], alpha_, beta_);
    return dx;
  }
  OrderDescriptor order() const override {
    BlockKind k = kind_of(BlockTag::kActivation, dim_, dim_);
    k.activation = act_;
    k.swish_beta = beta_;
    return catalog_order(k);
  }
  double kink_distance(const double*, const Vec& x) const override {
    if (act_ == Activation::kSwish) return std::numeric_limits<double>::infinity();
    return x.cwiseAbs().minCoeff();
  }

 private:
  int dim_;
  Activation act_;
  double alpha_, beta_;
};

class PoolingBlock final : public Block {
 public:
  PoolingBlock(int dim, int window, bool max_pool) : dim_(dim), w_(window), max_(max_pool) {
    require(window >= 1 && dim % window == 0, ErrorCode::kDimensionMismatch,
            "pooling window must divide the input size");
  }
  std::string name() const override { return max_ ? "MaxPool" : "AvgPool"; }
  int in_dim() const override { return dim_; }
  int out_dim() const override { return dim_ / w_; }
  int param_dim() const override { return 0; }
  int argmax(const Vec& x, int j) const {
    int best = j * w_;
    for (int m = j * w_ + 1; m < (j + 1) * w_; ++m)
      if (x[m] > x[best]) best = m;
    return best;
  }
  Vec forward(const double*, const Vec& x) const override {
    Vec y(out_dim());
    for (int j = 0; j < out_dim(); ++j) y[j] = max_ ? x[argmax(x, j)] : x.segment(j * w_, w_).mean();
    return y;
  }
  Vec backward(const double*, const Vec& x, const Vec& g, double*) const override {
    Vec dx = Vec::Zero(dim_);
    for (int j = 0; j < out_dim(); ++j) {
      if (max_) dx[argmax(x, j)] += g[j];
      else dx.segment(j * w_, w_).array() += g[j] / w_;
    }
    return dx;
  }
  OrderDescriptor order() const override { return catalog_order(kind_of(BlockTag::kPooling, dim_, out_dim())); }
  double kink_distance(const double*, const Vec& x) const override {
    if (!max_ || w_ == 1) return std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    for (int j = 0; j < out_dim(); ++j) {
      int b = argmax(x, j);
      for (int m = j * w_; m < (j + 1) * w_; ++m)
        if (m != b) gap = std::min(gap, x[b] - x[m]);
    }
    return gap;
  }

 private:
  int dim_, w_;
  bool max_;
};

class ConvBlock final : public Block {
 public:
  ConvBlock(int dim, std::vector<double> kernel) : dim_(dim), k_(std::move(kernel)) {
    require(!k_.empty() && static_cast<int>(k_.size()) <= dim, ErrorCode::kDimensionMismatch,
            "convolution kernel longer than the input");
  }
  std::string name() const override { return "Conv"; }
  int in_dim() const override { return dim_; }
  int out_dim() const override { return dim_ - static_cast<int>(k_.size()) + 1; }
  int param_dim() const override { return 0; }
  Vec forward(const double*, const Vec& x) const override {
    Vec y = Vec::Zero(out_dim());
    for (int j = 0; j < out_dim(); ++j)
      for (std::size_t m = 0; m < k_.size(); ++m) y[j] += k_[m] * x[j + static_cast<int>(m)];
    return y;
  }
  Vec backward(const double*, const Vec&, const Vec& g, double*) const override {
    Vec dx = Vec::Zero(dim_);
    for (int j = 0; j < out_dim(); ++j)
      for (std::size_t m = 0; m < k_.size(); ++m) dx[j + static_cast<int>(m)] += k_[m] * g[j];
    return dx;
  }
  OrderDescriptor order() const override {
    BlockKind k = kind_of(BlockTag::kConv, dim_, out_dim());
    k.kernel_l1 = 0.0;
    for (double w : k_) k.kernel_l1 += std::abs(w);
    return catalog_order(k);
  }

 private:
  int dim_;
  std::vector<double> k_;
};

class ResidualBlock final : public Block {
 public:
  explicit ResidualBlock(std::vector<std::unique_ptr<Block>> body) : body_(std::move(body)) {
    for (std::size_t i = 1; i < body_.size(); ++i)
      require(body_[i]->in_dim() == body_[i - 1]->out_dim(), ErrorCode::kDimensionMismatch,
              "residual body blocks do not chain");
    if (!body_.empty())
      require(body_.front()->in_dim() == body_.back()->out_dim(), ErrorCode::kDimensionMismatch,
              "residual body must preserve the feature size");
    for (const auto& b : body_) {
      offsets_.push_back(params_);
      params_ += b->param_dim();
    }
  }
  void set_dim(int d) { dim_ = d; }
  std::string name() const override { return "Residual"; }
  int in_dim() const override { return body_.empty() ? dim_ : body_.front()->in_dim(); }
  int out_dim() const override { return in_dim(); }
  int param_dim() const override { return params_; }
  Vec forward(const double* th, const Vec& x) const override {
    if (body_.empty()) return x;
    Vec h = x;
    for (std::size_t i = 0; i < body_.size(); ++i) h = body_[i]->forward(th + offsets_[i], h);
    return x + h;
  }
  Vec backward(const double* th, const Vec& x, const Vec& g, double* gt) const override {
    if (body_.empty()) return g;
    std::vector<Vec> ins{x};
    for (std::size_t i = 0; i < body_.size(); ++i) ins.push_back(body_[i]->forward(th + offsets_[i], ins.back()));
    Vec gb = g;
    for (std::size_t i = body_.size(); i-- > 0;) gb = body_[i]->backward(th + offsets_[i], ins[i], gb, gt + offsets_[i]);
    return g + gb;
  }
  OrderDescriptor order() const override {
    OrderDescriptor id = catalog_order(kind_of(BlockTag::kResidual, in_dim(), in_dim()));
    if (body_.empty()) return id;
    std::vector<OrderDescriptor> outer_first;
    for (auto it = body_.rbegin(); it != body_.rend(); ++it) outer_first.push_back((*it)->order());
    return sum_orders(network_order(outer_first), id);
  }
  double kink_distance(const double* th, const Vec& x) const override {
    double k = std::numeric_limits<double>::infinity();
    Vec h = x;
    for (std::size_t i = 0; i < body_.size(); ++i) {
      k = std::min(k, body_[i]->kink_distance(th + offsets_[i], h));
      h = body_[i]->forward(th + offsets_[i], h);
    }
    return k;
  }

 private:
  std::vector<std::unique_ptr<Block>> body_;
  std::vector<int> offsets_;
  int params_ = 0;
  int dim_ = 1;
};

class SwiGLUBlock final : public Block {
 public:
  SwiGLUBlock(int in, int out, double beta) : in_(in), out_(out), beta_(beta) {}
  std::string name() const override { return "SwiGLU"; }
  int in_dim() const override { return in_; }
  int out_dim() const override { return out_; }
  int param_dim() const override { return 2 * (out_ * in_ + out_); }
  // Layout: W, b, V, c.
  void pre(const double* th, const Vec& x, Vec& z1, Vec& z2) const {
    int half = out_ * in_ + out_;
    z1 = CMap(th, out_, in_) * x + Eigen::Map<const Vec>(th + out_ * in_, out_);
    z2 = CMap(th + half, out_, in_) * x + Eigen::Map<const Vec>(th + half + out_ * in_, out_);
  }
  Vec forward(const double* th, const Vec& x) const override {
    Vec z1, z2;
    pre(th, x, z1, z2);
    Vec y(out_);
    for (int i = 0; i < out_; ++i) y[i] = act_value(Activation::kSwish, z1[i], 0.0, beta_) * z2[i];
    return y;
  }
  Vec backward(const double* th, const Vec& x, const Vec& g, double* gt) const override {
    Vec z1, z2;
    pre(th, x, z1, z2);
    Vec d1(out_), d2(out_);
    for (int i = 0; i < out_; ++i) {
      d1[i] = g[i] * z2[i] * act_slope(Activation::kSwish, z1[i], 0.0, beta_);
      d2[i] = g[i] * act_value(Activation::kSwish, z1[i], 0.0, beta_);
    }
    int half = out_ * in_ + out_;
    MMap(gt, out_, in_) += d1 * x.transpose();
    Eigen::Map<Vec>(gt + out_ * in_, out_) += d1;
    MMap(gt + half, out_, in_) += d2 * x.transpose();
    Eigen::Map<Vec>(gt + half + out_ * in_, out_) += d2;
    return CMap(th, out_, in_).transpose() * d1 + CMap(th + half, out_, in_).transpose() * d2;
  }
  OrderDescriptor order() const override {
    BlockKind k = kind_of(BlockTag::kSwiGLU, in_, out_);
    k.swish_beta = beta_;
    return catalog_order(k);
  }

 private:
  int in_, out_;
  double beta_;
};

// H + PV H (H^T KQ H) / L
class LinearAttentionBlock final : public Block {
 public:
  LinearAttentionBlock(int d, int tokens) : d_(d), L_(tokens) {}
  std::string name() const override { return "LinearAttention"; }
  int in_dim() const override { return d_ * L_; }
  int out_dim() const override { return d_ * L_; }
  int param_dim() const override { return 2 * d_ * d_; }
  Vec forward(const double* th, const Vec& x) const override {
    CTok H(x.data(), d_, L_);
    CMap PV(th, d_, d_), KQ(th + d_ * d_, d_, d_);
    Mat S = H.transpose() * KQ * H;
    Mat Y = H + PV * H * S / L_;
    return Eigen::Map<const Vec>(Y.data(), Y.size());
  }
  Vec backward(const double* th, const Vec& x, const Vec& g, double* gt) const override {
    CTok H(x.data(), d_, L_), G(g.data(), d_, L_);
    CMap PV(th, d_, d_), KQ(th + d_ * d_, d_, d_);
    Mat S = H.transpose() * KQ * H;
    Mat Z = PV * H;
    Mat dS = Z.transpose() * G / L_;
    Mat dZ = G * S.transpose() / L_;
    MMap(gt, d_, d_) += dZ * H.transpose();
    MMap(gt + d_ * d_, d_, d_) += H * dS * H.transpose();
    Mat dH = G + PV.transpose() * dZ + KQ * H * dS.transpose() + KQ.transpose() * H * dS;
    return Eigen::Map<const Vec>(dH.data(), dH.size());
  }
  OrderDescriptor order() const override {
    BlockKind k = kind_of(BlockTag::kLinearAttention, d_ * L_, d_ * L_);
    k.tokens = L_;
    k.model_dim = d_;
    return catalog_order(k);
  }

 private:
  int d_, L_;
};

// H + P V H relu(H^T K Q H / (sqrt(d) L))
class ReluAttentionBlock final : public Block {
 public:
  ReluAttentionBlock(int d, int tokens) : d_(d), L_(tokens), c_(1.0 / (std::sqrt(double(d)) * tokens)) {}
  std::string name() const override { return "ReluAttention"; }
  int in_dim() const override { return d_ * L_; }
  int out_dim() const override { return d_ * L_; }
  int param_dim() const override { return 4 * d_ * d_; }
  Mat scores(const double* th, const Mat& H) const {
    CMap K(th + 2 * d_ * d_, d_, d_), Q(th + 3 * d_ * d_, d_, d_);
    return c_ * H.transpose() * K * Q * H;
  }
  Vec forward(const double* th, const Vec& x) const override {
    Mat H = CTok(x.data(), d_, L_);
    CMap P(th, d_, d_), V(th + d_ * d_, d_, d_);
    Mat R = scores(th, H).cwiseMax(0.0);
    Mat Y = H + P * V * H * R;
    return Eigen::Map<const Vec>(Y.data(), Y.size());
  }
  Vec backward(const double* th, const Vec& x, const Vec& g, double* gt) const override {
    Mat H = CTok(x.data(), d_, L_);
    CTok G(g.data(), d_, L_);
    CMap P(th, d_, d_), V(th + d_ * d_, d_, d_), K(th + 2 * d_ * d_, d_, d_), Q(th + 3 * d_ * d_, d_, d_);
    Mat A = scores(th, H);
    Mat R = A.cwiseMax(0.0);
    Mat W = P * V;
    Mat Z = W * H;
    Mat dZ = G * R.transpose();
    Mat dA = (Z.transpose() * G).array() * (A.array() >= 0.0).cast<double>();
    Mat dW = dZ * H.transpose();
    MMap(gt, d_, d_) += dW * V.transpose();
    MMap(gt + d_ * d_, d_, d_) += P.transpose() * dW;
    Mat KQ = K * Q;
    Mat dKQ = c_ * H * dA * H.transpose();
    MMap(gt + 2 * d_ * d_, d_, d_) += dKQ * Q.transpose();
    MMap(gt + 3 * d_ * d_, d_, d_) += K.transpose() * dKQ;
    Mat dH = G + W.transpose() * dZ + c_ * (KQ * H * dA.transpose() + KQ.transpose() * H * dA);
    return Eigen::Map<const Vec>(dH.data(), dH.size());
  }
  OrderDescriptor order() const override {
    BlockKind k = kind_of(BlockTag::kReluAttention, d_ * L_, d_ * L_);
    k.tokens = L_;
    k.model_dim = d_;
    return catalog_order(k);
  }
  double kink_distance(const double* th, const Vec& x) const override {
    return scores(th, CTok(x.data(), d_, L_)).cwiseAbs().minCoeff();
  }

 private:
  int d_, L_;
  double c_;
};

class PowerCounterexampleBlock final : public Block {
 public:
  PowerCounterexampleBlock(int in, int M) : in_(in), M_(M) {
    require(M >= 1, ErrorCode::kInvalidArgument, "order must be >= 1");
  }
  std::string name() const override { return "PowerCounterexample"; }
  int in_dim() const override { return in_; }
  int out_dim() const override { return 1; }
  int param_dim() const override { return 1; }
  Vec forward(const double* th, const Vec&) const override {
    double t = th[0];
    return Vec::Constant(1, std::pow(t, M_) + M_ * std::pow(std::abs(t), M_ - 1));
  }
  Vec backward(const double* th, const Vec&, const Vec& g, double* gt) const override {
    double t = th[0];
    double sgn = t >= 0.0 ? 1.0 : -1.0;
    double d = M_ * std::pow(t, M_ - 1);
    if (M_ >= 2) d += M_ * (M_ - 1) * std::pow(std::abs(t), M_ - 2) * sgn;
    gt[0] += g[0] * d;
    return Vec::Zero(in_);
  }
  OrderDescriptor order() const override {
    OrderDescriptor o;
    o.m_param = M_;
    o.m_input = 0;
    o.env_p = NonnegPoly::monomial(M_);
    o.env_r = NonnegPoly::constant(1.0);
    o.env_q = NonnegPoly::monomial(M_) + NonnegPoly::monomial(M_ - 1, M_);
    o.env_t = NonnegPoly::constant(1.0);
    return o;
  }
  double kink_distance(const double* th, const Vec&) const override {
    return M_ == 2 ? std::abs(th[0]) : std::numeric_limits<double>::infinity();
  }

 private:
  int in_, M_;
};

class ToyTwoLayerBlock final : public Block {
 public:
  ToyTwoLayerBlock(int d, double alpha) : d_(d), alpha_(alpha) {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidArgument, "leaky slope must lie in (0, 1)");
  }
  std::string name() const override { return "ToyTwoLayer"; }
  int in_dim() const override { return d_; }
  int out_dim() const override { return 1; }
  int param_dim() const override { return 2 * d_ + 2; }
  Vec forward(const double* th, const Vec& x) const override {
    Eigen::Map<const Vec> w1(th, d_), w2(th + d_, d_);
    double a1 = th[2 * d_], a2 = th[2 * d_ + 1];
    double z1 = w1.dot(x), z2 = -w2.dot(x);
    return Vec::Constant(1, w1.dot(x) + w2.dot(x) + a1 * act_value(Activation::kLeakyRelu, z1, alpha_, 1.0) -
                                a2 * act_value(Activation::kLeakyRelu, z2, alpha_, 1.0));
  }
  Vec backward(const double* th, const Vec& x, const Vec& g, double* gt) const override {
    Eigen::Map<const Vec> w1(th, d_), w2(th + d_, d_);
    double a1 = th[2 * d_], a2 = th[2 * d_ + 1];
    double z1 = w1.dot(x), z2 = -w2.dot(x);
    double s1 = act_slope(Activation::kLeakyRelu, z1, alpha_, 1.0);
    double s2 = act_slope(Activation::kLeakyRelu, z2, alpha_, 1.0);
    Eigen::Map<Vec>(gt, d_) += g[0] * (1.0 + a1 * s1) * x;
    Eigen::Map<Vec>(gt + d_, d_) += g[0] * (1.0 + a2 * s2) * x;
    gt[2 * d_] += g[0] * act_value(Activation::kLeakyRelu, z1, alpha_, 1.0);
    gt[2 * d_ + 1] -= g[0] * act_value(Activation::kLeakyRelu, z2, alpha_, 1.0);
    return g[0] * ((1.0 + a1 * s1) * w1 + (1.0 + a2 * s2) * w2);
  }
  OrderDescriptor order() const override {
    OrderDescriptor o;
    o.m_param = 2;
    o.m_input = 1;
    o.env_p = NonnegPoly::monomial(2, 1.0 / std::sqrt(2.0));
    o.env_r = NonnegPoly::monomial(1);
    o.env_q = NonnegPoly({0.0, std::sqrt(2.0), 0.5});
    o.env_t = NonnegPoly::monomial(1);
    return o;
  }
  double kink_distance(const double* th, const Vec& x) const override {
    Eigen::Map<const Vec> w1(th, d_), w2(th + d_, d_);
    return std::min(std::abs(w1.dot(x)), std::abs(w2.dot(x)));
  }

 private:
  int d_;
  double alpha_;
};

}  // namespace

std::unique_ptr<Block> make_linear(int in, int out, bool bias) { return std::make_unique<LinearBlock>(in, out, bias); }
std::unique_ptr<Block> make_perceptron_pow(int in, int out, int k, Activation act, double alpha) {
  return std::make_unique<PerceptronPowBlock>(in, out, k, act, alpha);
}
std::unique_ptr<Block> make_activation(int dim, Activation act, double alpha, double beta) {
  return std::make_unique<ActivationBlock>(dim, act, alpha, beta);
}
std::unique_ptr<Block> make_pooling(int dim, int window, bool max_pool) {
  return std::make_unique<PoolingBlock>(dim, window, max_pool);
}
std::unique_ptr<Block> make_conv(int dim, std::vector<double> kernel) {
  return std::make_unique<ConvBlock>(dim, std::move(kernel));
}
std::unique_ptr<Block> make_residual(std::vector<std::unique_ptr<Block>> body) {
  return std::make_unique<ResidualBlock>(std::move(body));
}
std::unique_ptr<Block> make_residual_identity(int dim) {
  auto r = std::make_unique<ResidualBlock>(std::vector<std::unique_ptr<Block>>{});
  r->set_dim(dim);
  return r;
}
std::unique_ptr<Block> make_swiglu(int in, int out, double beta) { return std::make_unique<SwiGLUBlock>(in, out, beta); }
std::unique_ptr<Block> make_linear_attention(int d, int tokens) {
  return std::make_unique<LinearAttentionBlock>(d, tokens);
}
std::unique_ptr<Block> make_relu_attention(int d, int tokens) {
  return std::make_unique<ReluAttentionBlock>(d, tokens);
}
std::unique_ptr<Block> make_power_counterexample(int in, int M) { return std::make_unique<PowerCounterexampleBlock>(in, M); }
std::unique_ptr<Block> make_toy_two_layer(int d, double alpha) { return std::make_unique<ToyTwoLayerBlock>(d, alpha); }

}  // namespace nh
