#include "nearhom/kkt.hpp"

#include <cmath>

#include "nearhom/errors.hpp"

namespace nh {

namespace {

Vec fd_gradient_fM(const NetworkModel& model, const Vec& theta, const Vec& x, int M, const NonnegPoly& pa,
                   const RadiusSchedule& sched) {
  double h = 1e-5 * (1.0 + theta.norm());
  Vec g(theta.size());
  for (int k = 0; k < theta.size(); ++k) {
    Vec tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    g[k] = (estimate_fM(model, tp, x, M, pa, sched).value - estimate_fM(model, tm, x, M, pa, sched).value) / (2 * h);
  }
  return g;
}

}  // namespace

HomogenizedSamples homogenize_samples(const NetworkModel& model, const Vec& theta, const Dataset& data, int M,
                                      const NonnegPoly& pa, const RadiusSchedule& sched) {
  HomogenizedSamples hs;
  hs.margins.resize(data.n());
  hs.grad_source = model.weak_homogeneous_gradient ? "radial_limit" : "finite_difference";
  for (int i = 0; i < data.n(); ++i) {
    Vec x = data.X.row(i).transpose();
    HomogenizationEstimate f = estimate_fM(model, theta, x, M, pa, sched);
    hs.margins[i] = data.y[i] * f.value;
    hs.converged = hs.converged && f.converged;
    if (model.weak_homogeneous_gradient) {
      GradientEstimate g = estimate_gradM(model, theta, x, M, sched);
      hs.converged = hs.converged && g.converged;
      hs.grads.push_back(data.y[i] * g.value);
    } else {
      hs.grads.push_back(data.y[i] * fd_gradient_fM(model, theta, x, M, pa, sched));
    }
  }
  return hs;
}

Vec homogenized_direction(const LossEval& eval, const HomogenizedSamples& hs) {
  Vec h = Vec::Zero(hs.grads.front().size());
  for (std::size_t i = 0; i < hs.grads.size(); ++i) h += eval.weights[static_cast<Eigen::Index>(i)] * hs.grads[i];
  return h;
}

std::vector<double> compute_lambdas(const LossEval& eval, const HomogenizedSamples& hs, double rho, int M) {
  double fmin = hs.margins.minCoeff();
  require(fmin > 0.0, ErrorCode::kDomain, "multipliers need a positive homogenized margin");
  double hn = homogenized_direction(eval, hs).norm();
  require(hn > 0.0, ErrorCode::kDomain, "degenerate point: homogenized loss gradient vanishes");
  double scale = std::pow(fmin, 1.0 - 2.0 / M) * rho / hn;
  std::vector<double> lam(hs.grads.size());
  for (std::size_t i = 0; i < lam.size(); ++i) lam[i] = scale * eval.weights[static_cast<Eigen::Index>(i)];
  return lam;
}

double compute_beta(const Vec& theta, const Vec& h_dir) {
  double a = theta.norm(), b = h_dir.norm();
  require(a > 0.0 && b > 0.0, ErrorCode::kDomain, "alignment of a zero vector");
  return std::clamp(theta.dot(h_dir) / (a * b), -1.0, 1.0);
}

KktReport kkt_residuals(const NetworkModel& model, const Vec& theta, const Dataset& data, int M,
                        const NonnegPoly& pa, double B_const, const RadiusSchedule& sched) {
  require(std::isfinite(B_const), ErrorCode::kInvalidArgument, "B must be finite");
  LossEval eval = loss(model, theta, data);
  require(eval.log_loss < -pa(theta.norm()) - std::log(static_cast<double>(data.n())), ErrorCode::kDomain,
          "KKT residuals need a strongly separable point");
  HomogenizedSamples hs = homogenize_samples(model, theta, data, M, pa, sched);
  KktReport r;
  r.converged = hs.converged;
  r.grad_source = hs.grad_source;
  r.fM_min = hs.margins.minCoeff();
  require(r.fM_min > 0.0, ErrorCode::kDomain, "homogenized margin is not positive");
  double rho = theta.norm();
  Vec h = homogenized_direction(eval, hs);
  r.lambdas = compute_lambdas(eval, hs, rho, M);
  r.beta = compute_beta(theta, h);
  double gap = std::max(0.0, 1.0 - r.beta);
  r.B_t = rho / std::pow(r.fM_min, 1.0 / M);
  if (B_const <= 0.0) B_const = r.B_t;
  r.B_const = B_const;
  r.eps = std::sqrt(2.0) * B_const * std::sqrt(gap);
  r.eps_t = std::sqrt(2.0) * r.B_t * std::sqrt(gap);
  r.delta = data.n() * B_const * B_const * (1.0 + 2.0 * pa(rho)) / (M * r.fM_min);
  r.delta_t = data.n() * r.B_t * r.B_t * (1.0 + 2.0 * pa(rho)) / (M * r.fM_min);
  r.stationarity_identity = r.B_t * std::sqrt(2.0 * gap);

  // Direct evaluation at the rescaled point, independent of the homogeneity shortcuts.
  Vec theta_hat = theta / std::pow(r.fM_min, 1.0 / M);
  r.rescaled_point_norm = theta_hat.norm();
  HomogenizedSamples hat = homogenize_samples(model, theta_hat, data, M, pa, sched);
  r.converged = r.converged && hat.converged;
  Vec resid = theta_hat;
  r.complementarity = 0.0;
  for (std::size_t i = 0; i < r.lambdas.size(); ++i) {
    resid -= r.lambdas[i] * hat.grads[i];
    r.complementarity = std::max(r.complementarity, r.lambdas[i] * std::abs(hat.margins[static_cast<Eigen::Index>(i)] - 1.0));
  }
  r.stationarity = resid.norm();
  r.feasibility = hat.margins.minCoeff();
  return r;
}

void to_json(nlohmann::json& j, const KktReport& r) {
  j = nlohmann::json{{"lambdas", r.lambdas},
                     {"beta", r.beta},
                     {"eps", r.eps},
                     {"delta", r.delta},
                     {"B_const", r.B_const},
                     {"B_t", r.B_t},
                     {"eps_time_varying", r.eps_t},
                     {"delta_time_varying", r.delta_t},
                     {"fM_min", r.fM_min},
                     {"rescaled_point_norm", r.rescaled_point_norm},
                     {"stationarity_measured", r.stationarity},
                     {"stationarity_identity", r.stationarity_identity},
                     {"complementarity_measured", r.complementarity},
                     {"feasibility_min", r.feasibility},
                     {"estimator_converged", r.converged},
                     {"grad_source", r.grad_source}};
}

}  // namespace nh
