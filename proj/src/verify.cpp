#include "nearhom/verify.hpp"

#include <array>
#include <cmath>

#include "nearhom/errors.hpp"
#include "nearhom/parallel.hpp"

namespace nh {

namespace {

constexpr double kSlack = 1e-9;

double op_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Mat>(m).singularValues()(0);
}

struct Worst {
  double v = -std::numeric_limits<double>::infinity();
  int violations = 0;
  void add(double lhs, double bound) {
    v = std::max(v, lhs - bound);
    if (lhs - bound > kSlack * (1.0 + bound)) ++violations;
  }
};

}  // namespace

Vec sample_in_ball(std::mt19937_64& rng, int dim, double radius) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  Vec u(dim);
  for (int i = 0; i < dim; ++i) u[i] = normal(rng);
  double n = u.norm();
  if (n == 0.0) return u;
  return u * (radius * std::pow(unif(rng), 1.0 / dim) / n);
}

void block_jacobians(const Block& block, const double* theta, const Vec& x, Mat& j_param, Mat& j_input) {
  int out = block.out_dim();
  j_param = Mat::Zero(out, block.param_dim());
  j_input = Mat::Zero(out, block.in_dim());
  Vec row(block.param_dim());
  for (int i = 0; i < out; ++i) {
    row.setZero();
    Vec e = Vec::Unit(out, i);
    j_input.row(i) = block.backward(theta, x, e, row.data()).transpose();
    j_param.row(i) = row.transpose();
  }
}

NearHomReport verify_near_homogeneity(const NetworkModel& model, const Dataset& data, int M, const NonnegPoly& p,
                                      const NonnegPoly& q, int samples, double radius, std::uint64_t seed,
                                      int threads) {
  require(M >= 1, ErrorCode::kInvalidArgument, "order must be positive");
  require(p.degree() <= M && q.degree() <= M, ErrorCode::kInvalidArgument, "envelope degree exceeds M");
  require(samples >= 1 && radius > 0.0, ErrorCode::kInvalidArgument, "need samples >= 1 and radius > 0");
  NonnegPoly dp = p.derivative(), dq = q.derivative();
  std::vector<std::array<Worst, 3>> per(samples);
  parallel_for(samples, threads, [&](int s) {
    std::mt19937_64 rng(item_seed(seed, static_cast<std::uint64_t>(s)));
    Vec theta = sample_in_ball(rng, model.dim(), radius);
    double r = theta.norm();
    Vec g;
    for (int i = 0; i < data.n(); ++i) {
      double f = model.grad_params(theta, data.X.row(i).transpose(), g);
      per[s][0].add(std::abs(g.dot(theta) - M * f), dp(r));
      per[s][1].add(g.norm(), dq(r));
      per[s][2].add(std::abs(f), q(r));
    }
  });
  NearHomReport rep;
  for (const auto& w : per) {
    rep.max_a1 = std::max(rep.max_a1, w[0].v);
    rep.max_a2 = std::max(rep.max_a2, w[1].v);
    rep.max_a3 = std::max(rep.max_a3, w[2].v);
    rep.violations += w[0].violations + w[1].violations + w[2].violations;
  }
  rep.samples = samples;
  rep.evaluations = samples * data.n();
  return rep;
}

DualHomReport verify_dual_homogeneity(const Block& block, const OrderDescriptor& order, int samples,
                                      double param_radius, double input_radius, std::uint64_t seed, int threads) {
  order.validate();
  require(samples >= 1, ErrorCode::kInvalidArgument, "need samples >= 1");
  const int M = order.m_param, N = order.m_input;
  NonnegPoly dp = order.env_p.derivative(), dq = order.env_q.derivative();
  NonnegPoly dr = order.env_r.derivative(), dt = order.env_t.derivative();
  std::vector<std::array<Worst, 5>> per(samples);
  parallel_for(samples, threads, [&](int s) {
    std::mt19937_64 rng(item_seed(seed, static_cast<std::uint64_t>(s)));
    Vec theta = sample_in_ball(rng, block.param_dim(), param_radius);
    Vec x = sample_in_ball(rng, block.in_dim(), input_radius);
    double a = theta.norm(), b = x.norm();
    Vec y = block.forward(theta.data(), x);
    Mat jp, jx;
    block_jacobians(block, theta.data(), x, jp, jx);
    Vec e1 = (block.param_dim() > 0 ? Vec(jp * theta) : Vec::Zero(y.size())) - M * y;
    Vec e2 = jx * x - N * y;
    per[s][0].add(e1.norm(), dp(a) * order.env_r(b));
    per[s][1].add(e2.norm(), order.env_p(a) * dr(b));
    per[s][2].add(op_norm(jp), dq(a) * order.env_t(b));
    per[s][3].add(op_norm(jx), order.env_q(a) * dt(b));
    per[s][4].add(y.norm(), order.env_q(a) * order.env_t(b));
  });
  DualHomReport rep;
  for (const auto& w : per) {
    rep.max_b1_param = std::max(rep.max_b1_param, w[0].v);
    rep.max_b1_input = std::max(rep.max_b1_input, w[1].v);
    rep.max_b2_param = std::max(rep.max_b2_param, w[2].v);
    rep.max_b2_input = std::max(rep.max_b2_input, w[3].v);
    rep.max_b3 = std::max(rep.max_b3, w[4].v);
    for (const auto& k : w) rep.violations += k.violations;
  }
  rep.samples = samples;
  return rep;
}

}  // namespace nh
