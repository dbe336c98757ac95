#include "nearhom/toy.hpp"

#include <cmath>
#include <random>

#include "nearhom/errors.hpp"

namespace nh {

void ToyConfig::validate() const {
  require(d >= 1, ErrorCode::kInvalidArgument, "toy dimension must be positive");
  require(n >= 2 && n % 2 == 0, ErrorCode::kInvalidArgument, "toy sample count must be even");
  require(gamma_star > 0.0 && gamma_star <= 1.0, ErrorCode::kInvalidArgument, "gamma_star must lie in (0, 1]");
  require(alpha_L > 0.0 && alpha_L < 1.0, ErrorCode::kInvalidArgument, "alpha_L must lie in (0, 1)");
  require(horizon > 0.0 && rk_tolerance > 0.0 && max_step > 0.0, ErrorCode::kInvalidArgument,
          "horizon, rk_tolerance and max_step must be positive");
  require(first_checkpoint > 0.0 && checkpoint_factor > 1.0, ErrorCode::kInvalidArgument, "bad checkpoint ladder");
}

ToyDataset gen_symmetric_dataset(int d, int n, double gamma_star, std::uint64_t seed) {
  require(d >= 1 && n >= 2 && n % 2 == 0, ErrorCode::kInvalidArgument, "need d >= 1 and an even n >= 2");
  require(gamma_star > 0.0 && gamma_star <= 1.0, ErrorCode::kInvalidArgument,
          "no unit-ball dataset has linear margin above 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  ToyDataset out;
  Vec w(d);
  for (int k = 0; k < d; ++k) w[k] = normal(rng);
  w.normalize();
  if (w[0] < 0.0) w = -w;
  out.w_star = w;
  out.data.X.resize(n, d);
  out.data.y.resize(n);
  const int half = n / 2;
  for (int i = 0; i < half; ++i) {
    double y = unif(rng) < 0.5 ? -1.0 : 1.0;
    double s = gamma_star + (1.0 - gamma_star) * unif(rng);
    // Orthogonal part uniform in the ball of radius sqrt(1 - s^2) within w's complement.
    Vec u(d);
    for (int k = 0; k < d; ++k) u[k] = normal(rng);
    u -= u.dot(w) * w;
    double un = u.norm();
    double rad = std::sqrt(std::max(0.0, 1.0 - s * s));
    if (d > 1 && un > 0.0) u *= rad * std::pow(unif(rng), 1.0 / (d - 1)) / un;
    else u.setZero();
    Vec x = y * (s * w + u);
    out.data.X.row(i) = x.transpose();
    out.data.y[i] = y;
    out.data.X.row(i + half) = -x.transpose();
    out.data.y[i + half] = -y;
  }
  return out;
}

double toy_forward(const Vec& theta, const Vec& x, double alpha_L) {
  const int d = static_cast<int>(x.size());
  require(theta.size() == 2 * d + 2, ErrorCode::kDimensionMismatch, "toy parameters must be (w1, w2, a1, a2)");
  auto phi = [&](double z) { return z >= 0.0 ? z : alpha_L * z; };
  double z1 = theta.head(d).dot(x), z2 = theta.segment(d, d).dot(x);
  return z1 + z2 + theta[2 * d] * phi(z1) - theta[2 * d + 1] * phi(-z2);
}

NetworkModel toy_model(int d, double alpha_L) {
  std::vector<std::unique_ptr<Block>> blocks;
  blocks.push_back(make_toy_two_layer(d, alpha_L));
  NetworkModel m(d, std::move(blocks));
  m.description = {{"input_dim", d}, {"blocks", {{{"kind", "ToyTwoLayer"}, {"alpha", alpha_L}}}}};
  return m;
}

Certificate toy_certificate(double x_max) {
  ScalarEnvelope e = scalar_envelope(toy_model(1, 0.5).blocks().front()->order(), x_max);
  return {e.M, e.p, e.q};
}

Vec toy_full_params(const Vec& z) {
  const Eigen::Index d = z.size() - 1;
  Vec th(2 * d + 2);
  th << z.head(d), z.head(d), z[d], z[d];
  return th;
}

Vec reduced_ode_rhs(const Vec& z, const Dataset& data, double c_L) {
  const int d = data.d();
  require(z.size() == d + 1, ErrorCode::kDimensionMismatch, "reduced state must be (w, a)");
  Vec w = z.head(d);
  double a = z[d];
  Vec m = (2.0 + 2.0 * c_L * a) * data.y.cwiseProduct(data.X * w);
  Vec e = (-m).array().exp();
  Vec ey = e.cwiseProduct(data.y) / data.n();
  Vec out(d + 1);
  out.head(d) = (1.0 + c_L * a) * (data.X.transpose() * ey);
  out[d] = c_L * ey.dot(data.X * w);
  return out;
}

double balancing_residual(const Vec& z, double c_L) {
  const Eigen::Index d = z.size() - 1;
  double s = z[d] + 1.0 / c_L;
  return s * s - z.head(d).squaredNorm() - 1.0 / (c_L * c_L);
}

double toy_t0(double gamma_star) {
  double g = 4.0 / gamma_star;
  return std::max(16.0, std::pow(g * std::log(g), 4));
}

double toy_loss_bound(double T, double gamma_star) {
  double l = std::log(T);
  return (1.0 + l * l / (4.0 * gamma_star * gamma_star)) / T;
}

namespace {

Vec rk4(const Vec& z, double h, const Dataset& data, double c) {
  Vec k1 = reduced_ode_rhs(z, data, c);
  Vec k2 = reduced_ode_rhs(z + 0.5 * h * k1, data, c);
  Vec k3 = reduced_ode_rhs(z + 0.5 * h * k2, data, c);
  Vec k4 = reduced_ode_rhs(z + h * k3, data, c);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double spherical_speed(const FlowState& s) {
  if (s.rho <= 1e-12) return 0.0;
  Vec u = s.theta / s.rho;
  return s.eval.loss * (s.dir - s.dir.dot(u) * u).norm() / s.rho;
}

}  // namespace

ToyRun run_reduced_ode(const ToyConfig& cfg, const Dataset& data) {
  cfg.validate();
  data.validate();
  require(data.d() == cfg.d, ErrorCode::kDimensionMismatch, "dataset dimension differs from the toy config");
  const double c = cfg.c_L();
  const int d = cfg.d;
  NetworkModel model = toy_model(d, cfg.alpha_L);
  Certificate cert = toy_certificate(data.max_norm());
  DynamicsConfig dc;
  dc.mode = Mode::kGF;
  dc.horizon = cfg.horizon;
  InvariantMonitor mon(data, cert, dc);
  const double t0 = toy_t0(cfg.gamma_star);

  ToyRun run;
  run.traj.mode = Mode::kGF;
  run.traj.M = cert.M;
  Vec z = Vec::Zero(d + 1);
  double t = 0.0, zeta = 0.0;
  long step = 0;
  bool have_t0 = false;

  FlowState st = evaluate_state(model, data, toy_full_params(z));
  auto extra_of = [&](const Vec& zz) { return ToyExtra{zz.head(d).norm(), zz[d], balancing_residual(zz, c)}; };
  auto stream = [&](const Vec& zz, double tt, const FlowState& s) {
    double w = zz.head(d).norm();
    double bal = balancing_residual(zz, c);
    run.max_abs_balancing = std::max(run.max_abs_balancing, std::abs(bal));
    if (std::abs(bal) > kBalancingFactor * cfg.rk_tolerance) ++run.balancing_violations;
    run.min_a = std::min(run.min_a, zz[d]);
    if (tt >= 1.0 && s.eval.log_loss > std::log(toy_loss_bound(tt, cfg.gamma_star)) + 1e-12) ++run.loss_bound_violations;
    if (tt >= t0 && have_t0) {
      if (w * w * c * c + 1.0 < std::log(tt) / 16.0) ++run.norm_lower_violations;
      if (w > (4.0 / cfg.gamma_star + 1.0) * std::sqrt(std::log(tt)) + run.w_norm_t0 + 1e-12) ++run.norm_upper_violations;
    }
  };
  auto emit = [&](const FlowState& s) {
    TrajectoryRecord rec;
    mon.observe(s, t, step, &rec);
    rec.zeta = zeta;
    run.traj.records.push_back(std::move(rec));
    run.extra.push_back(extra_of(z));
  };
  stream(z, t, st);
  emit(st);

  double ckpt = std::min(cfg.first_checkpoint, cfg.horizon);
  auto next_stop = [&]() {
    double s = ckpt;
    if (!have_t0 && t0 < cfg.horizon && t0 > t) s = std::min(s, t0);
    return s;
  };
  double h = std::min(1e-3, ckpt);
  while (t < cfg.horizon) {
    double stop = next_stop();
    double hs = std::min({h, cfg.max_step, stop - t});
    bool hit = hs == stop - t;
    Vec y1 = rk4(z, hs, data, c);
    Vec y2 = rk4(rk4(z, 0.5 * hs, data, c), 0.5 * hs, data, c);
    double err = (y2 - y1).norm() / 15.0 / (1.0 + z.norm());
    if (!std::isfinite(err) || err > cfg.rk_tolerance) {
      ++run.rejected;
      h = 0.5 * hs;
      if (h < 1e-15) fail(ErrorCode::kNumerical, "reduced ODE step size collapsed at t=" + std::to_string(t));
      continue;
    }
    z = std::move(y2);
    t = hit ? stop : t + hs;
    ++step;
    FlowState next = evaluate_state(model, data, toy_full_params(z));
    zeta += 0.5 * hs * (spherical_speed(st) + spherical_speed(next));
    st = std::move(next);
    double grow = err > 0.0 ? 0.9 * std::pow(cfg.rk_tolerance / err, 0.2) : 2.0;
    h = std::max(h, hs) * std::clamp(grow, 0.2, 2.0);

    bool at_t0 = hit && !have_t0 && t == t0;
    if (at_t0) {
      have_t0 = true;
      run.w_norm_t0 = z.head(d).norm();
    }
    stream(z, t, st);
    bool at_ckpt = hit && t == ckpt;
    if (at_ckpt || at_t0 || t >= cfg.horizon) {
      emit(st);
      if (at_ckpt) ckpt = std::min(ckpt * cfg.checkpoint_factor, cfg.horizon);
    } else {
      mon.observe(st, t, step, nullptr);
    }
  }
  run.traj.checks = mon.checks;
  run.traj.theta_final = st.theta;
  run.steps = step;
  return run;
}

ToyBoundReport toy_bound_checks(const ToyRun& run, const ToyConfig& cfg) {
  ToyBoundReport rep;
  rep.t0 = toy_t0(cfg.gamma_star);
  const double c = cfg.c_L();
  bool have_t0 = false;
  double w0 = 0.0;
  for (std::size_t k = 0; k < run.traj.records.size(); ++k) {
    const auto& r = run.traj.records[k];
    const auto& e = run.extra[k];
    if (!have_t0 && r.t >= rep.t0) {
      have_t0 = true;
      w0 = e.w_norm;  // the runner inserts a record at t0 exactly
    }
    ToyBoundReport::Row row{r.t, true, true, true};
    if (r.t >= 1.0) row.loss_ok = r.log_loss <= std::log(toy_loss_bound(r.t, cfg.gamma_star)) + 1e-12;
    if (have_t0) {
      row.norm_lower_ok = e.w_norm * e.w_norm * c * c + 1.0 >= std::log(r.t) / 16.0;
      row.norm_upper_ok = e.w_norm <= (4.0 / cfg.gamma_star + 1.0) * std::sqrt(std::log(r.t)) + w0 + 1e-12;
    }
    if (!(row.loss_ok && row.norm_lower_ok && row.norm_upper_ok) && !rep.first_violation) rep.first_violation = r.t;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace nh
