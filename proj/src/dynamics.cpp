#include "nearhom/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nearhom/errors.hpp"

namespace nh {

Certificate certificate_from_model(const NetworkModel& model, const Dataset& data) {
  ScalarEnvelope e = scalar_envelope(model.order(), data.max_norm());
  return {e.M, e.p, e.q};
}

void DynamicsConfig::validate() const {
  if (mode == Mode::kGD) {
    require(eta > 0.0 && std::isfinite(eta), ErrorCode::kInvalidArgument, "GD needs eta > 0");
    require(max_steps >= 1, ErrorCode::kInvalidArgument, "GD needs max_steps >= 1");
  } else {
    require(gf_tolerance > 0.0, ErrorCode::kInvalidArgument, "GF needs gf_tolerance > 0");
    require(horizon > 0.0, ErrorCode::kInvalidArgument, "GF needs a positive horizon");
    require(gf_max_step > 0.0 && gf_stability > 0.0, ErrorCode::kInvalidArgument, "GF step caps must be positive");
    require(gf_first_checkpoint > 0.0, ErrorCode::kInvalidArgument, "first checkpoint must be positive");
  }
  if (B) require(*B > 0.0, ErrorCode::kInvalidArgument, "B must be positive");
  require(A > 0.0, ErrorCode::kInvalidArgument, "A must be positive");
  require(record_every >= 0, ErrorCode::kInvalidArgument, "record_every must be >= 0");
  require(checkpoint_factor > 1.0, ErrorCode::kInvalidArgument, "checkpoint factor must exceed 1");
}

double gd_constant_heuristic(const Certificate& cert, double A, double rho) {
  double s = 0.0;
  for (int i = 1; i <= cert.q.degree(); ++i) s += i * cert.q.coeff(i);
  double b3 = std::max(s, 2.0 * s * s + 2.0 * A);
  double grow = std::pow(rho, cert.M - 1) + 1.0;
  return 2.0 * b3 * b3 * grow * grow * std::exp(-cert.pa_gd()(rho));
}

bool detect_separability_gf(const LossEval& s, int n, double rho, const NonnegPoly& pa) {
  return s.log_loss < -pa(rho) - std::log(static_cast<double>(n));
}

bool detect_separability_gd(const LossEval& s, int n, double rho, const PiecewisePoly& pa_gd, double eta, double B) {
  require(B > 0.0, ErrorCode::kInvalidArgument, "B must be positive");
  double cap = std::min(-std::log(static_cast<double>(n)) - 2.0, -std::log(B * eta));
  return s.log_loss < cap - pa_gd(rho);
}

void update_direction(DirectionState& st, const Vec& theta) {
  double r = theta.norm();
  require(r > 0.0, ErrorCode::kDomain, "direction of a zero parameter vector");
  Vec d = theta / r;
  if (st.dir.size() == d.size()) st.zeta += (d - st.dir).norm();
  st.dir = std::move(d);
}

namespace {

constexpr double kDirectionFloor = 1e-12;

// Spherical speed ||grad_perp L|| / rho.
double spherical_speed(const FlowState& s) {
  if (s.rho <= kDirectionFloor) return 0.0;
  Vec u = s.theta / s.rho;
  Vec perp = s.dir - s.dir.dot(u) * u;
  return s.eval.loss * perp.norm() / s.rho;
}

void require_finite(const Vec& theta, double t) {
  if (!theta.allFinite()) fail(ErrorCode::kNumerical, "non-finite parameters at t=" + std::to_string(t));
}

}  // namespace

FlowState evaluate_state(const NetworkModel& model, const Dataset& data, Vec theta) {
  FlowState s;
  s.dir = loss_grad_direction(model, theta, data, &s.eval);
  s.rho = theta.norm();
  s.theta = std::move(theta);
  return s;
}

InvariantMonitor::InvariantMonitor(const Dataset& data, const Certificate& cert, const DynamicsConfig& cfg)
    : n_(data.n()), cert_(cert), cfg_(cfg), pa_gf_(cert.pa_gf()), pa_gd_(cert.pa_gd()), dp_(cert.p.derivative()) {}

void InvariantMonitor::observe(const FlowState& s, double t, long step, TrajectoryRecord* rec) {
  const bool gd = cfg_.mode == Mode::kGD;
  double pa = gd ? pa_gd_(s.rho) : pa_gf_(s.rho);
  bool sep;
  if (gd) {
    double B = cfg_.B ? *cfg_.B : gd_constant_heuristic(cert_, cfg_.A, s.rho);
    sep = detect_separability_gd(s.eval, n_, s.rho, pa_gd_, cfg_.eta, B);
  } else {
    sep = detect_separability_gf(s.eval, n_, s.rho, pa_gf_);
  }
  checks.steps = step;
  checks.min_log_loss = std::min(checks.min_log_loss, s.eval.log_loss);
  if (s.theta.size() > 0) checks.max_theta_coeff = std::max(checks.max_theta_coeff, s.theta.maxCoeff());
  std::optional<MarginSnapshot> snap;
  if (s.rho > 0.0) snap = margin_snapshot(s.eval, n_, s.rho, cert_.M, pa, gd ? std::optional<double>(pa) : std::nullopt);
  double v_over_l = s.dir.dot(s.theta);

  if (!checks.sep_time && sep) {
    checks.sep_time = t;
    checks.sep_step = step;
    if (snap) {
      checks.eps_at_sep = snap->eps_t;
      double m = gd ? snap->gamma_hat : snap->gamma_tilde;
      if (std::isfinite(m)) checks.margin_at_sep = m;
    }
  }
  if (checks.sep_time) {
    bool first = checks.sep_step == step;
    if (!first) ++checks.post_sep_steps;
    if (!sep) flag(checks.sep_violations, "separability lost", t);
    if (snap) {
      double tracked = gd ? snap->gamma_hat : snap->gamma_tilde;
      if (!first) {
        double drop = prev_margin_ - tracked;
        checks.worst_margin_drop = std::max(checks.worst_margin_drop, drop);
        if (drop > cfg_.monotonicity_tol || std::isnan(tracked)) flag(checks.margin_violations, "margin decreased", t);
        if (!(s.rho > prev_rho_)) flag(checks.rho_violations, "parameter norm did not increase", t);
        if (gd && s.eval.log_loss > prev_log_loss_) flag(checks.loss_violations, "GD loss increased", t);
      }
      prev_margin_ = tracked;
      if (sep && !sandwich_holds(*snap)) flag(checks.sandwich_violations, "margin sandwich failed", t);
      if (gd && snap->gd_outside) ++checks.gd_outside_steps;
      checks.eps_final = snap->eps_t;
    }
    SpeedBracket br = speed_bracket(s.eval, n_, cert_.M, dp_(s.rho));
    double slack = 1e-9 * (1.0 + std::abs(br.lower) + std::abs(br.upper));
    if (!(v_over_l > 0.0) || v_over_l < br.lower - slack || v_over_l > br.upper + slack)
      flag(checks.speed_violations, "radial speed outside its bracket", t);
  }
  prev_rho_ = s.rho;
  prev_log_loss_ = s.eval.log_loss;

  if (rec) {
    rec->t = t;
    rec->step = step;
    rec->log_loss = s.eval.log_loss;
    rec->rho = s.rho;
    rec->v = s.eval.loss * v_over_l;
    rec->sep = sep;
    rec->theta = s.theta;
    if (snap) {
      rec->gamma = snap->gamma;
      rec->gamma_tilde = snap->gamma_tilde;
      rec->gamma_bar = snap->gamma_bar;
      if (gd && std::isfinite(snap->gamma_hat)) rec->gamma_hat = snap->gamma_hat;
      if (sep) rec->eps_t = snap->eps_t;
      rec->G_log = snap->G_log;
    } else {
      rec->G_log = pa + s.eval.log_loss;
    }
  }
}

void InvariantMonitor::flag(long& counter, const char* what, double t) {
  if (checks.first_violation.empty()) {
    std::ostringstream os;
    os.precision(10);
    os << what << " at t=" << t;
    checks.first_violation = os.str();
  }
  ++counter;
}

Trajectory run_gd(const NetworkModel& model, const Dataset& data, const Vec& theta0, const Certificate& cert,
                  const DynamicsConfig& cfg) {
  require(cfg.mode == Mode::kGD, ErrorCode::kInvalidArgument, "run_gd needs mode GD");
  cfg.validate();
  require(theta0.size() == model.dim(), ErrorCode::kDimensionMismatch, "theta0 has the wrong size");
  Trajectory tr;
  tr.mode = Mode::kGD;
  tr.M = cert.M;
  InvariantMonitor mon(data, cert, cfg);
  DirectionState dir;
  FlowState s = evaluate_state(model, data, theta0);
  long next_ckpt = 0;
  for (long step = 0;; ++step) {
    if (s.rho > kDirectionFloor) update_direction(dir, s.theta);
    bool last = step == cfg.max_steps;
    bool record = last || step == next_ckpt || (cfg.record_every > 0 && step % cfg.record_every == 0);
    TrajectoryRecord rec;
    mon.observe(s, cfg.eta * step, step, record ? &rec : nullptr);
    if (record) {
      rec.zeta = dir.zeta;
      tr.records.push_back(std::move(rec));
    }
    if (step == next_ckpt)
      next_ckpt = std::max(next_ckpt + 1, static_cast<long>(std::ceil(next_ckpt * cfg.checkpoint_factor)));
    if (last) break;
    Vec next = s.theta + (cfg.eta * s.eval.loss) * s.dir;
    require_finite(next, cfg.eta * (step + 1));
    s = evaluate_state(model, data, std::move(next));
  }
  tr.checks = mon.checks;
  tr.theta_final = s.theta;
  return tr;
}

Trajectory run_gf(const NetworkModel& model, const Dataset& data, const Vec& theta0, const Certificate& cert,
                  const DynamicsConfig& cfg) {
  require(cfg.mode == Mode::kGF, ErrorCode::kInvalidArgument, "run_gf needs mode GF");
  cfg.validate();
  require(theta0.size() == model.dim(), ErrorCode::kDimensionMismatch, "theta0 has the wrong size");
  Trajectory tr;
  tr.mode = Mode::kGF;
  tr.M = cert.M;
  InvariantMonitor mon(data, cert, cfg);
  RunChecks& ck = mon.checks;
  DirectionState dir;
  double zeta = 0.0;

  auto flow = [&](const FlowState& st) -> Vec { return st.eval.loss * st.dir; };  // -grad L
  auto emit = [&](const FlowState& st, double t, long step) {
    TrajectoryRecord rec;
    mon.observe(st, t, step, &rec);
    rec.zeta = zeta;
    tr.records.push_back(std::move(rec));
  };

  FlowState s = evaluate_state(model, data, theta0);
  double t = 0.0;
  long step = 0;
  emit(s, t, step);
  double ckpt = std::min(cfg.gf_first_checkpoint, cfg.horizon);
  double h = std::min(1e-3, ckpt);
  const int M = cert.M;
  while (t < cfg.horizon) {
    double cap = cfg.gf_stability / (s.eval.loss * (std::pow(s.rho, 2 * M - 2) + 1.0));
    double hs = std::min({h, cap, cfg.gf_max_step, ckpt - t});
    bool hit_ckpt = hs == ckpt - t;
    Vec k1 = flow(s);
    FlowState full = evaluate_state(model, data, s.theta + 0.5 * hs * k1);
    Vec y_full = s.theta + hs * flow(full);
    FlowState qa = evaluate_state(model, data, s.theta + 0.25 * hs * k1);
    Vec y_half = s.theta + 0.5 * hs * flow(qa);
    FlowState mid = evaluate_state(model, data, y_half);
    FlowState qb = evaluate_state(model, data, y_half + 0.25 * hs * flow(mid));
    Vec y_two = y_half + 0.5 * hs * flow(qb);
    double err = (y_two - y_full).norm() / (1.0 + s.rho);
    if (!std::isfinite(err) || err > cfg.gf_tolerance) {
      ++ck.rejected_steps;
      h = 0.5 * hs;
      if (h < 1e-15) fail(ErrorCode::kNumerical, "GF step size collapsed at t=" + std::to_string(t));
      continue;
    }
    require_finite(y_two, t + hs);
    FlowState next = evaluate_state(model, data, std::move(y_two));
    zeta += 0.5 * hs * (spherical_speed(s) + spherical_speed(next));
    t = hit_ckpt ? ckpt : t + hs;
    ++step;
    ck.min_step = std::min(ck.min_step, hs);
    double grow = err > 0.0 ? 0.9 * std::cbrt(cfg.gf_tolerance / err) : 2.0;
    h = std::max(h, hs) * std::clamp(grow, 0.2, 2.0);
    s = std::move(next);
    if (s.rho > kDirectionFloor) {
      dir.zeta = zeta;
      dir.dir = s.theta / s.rho;
    }
    if (hit_ckpt || t >= cfg.horizon) {
      emit(s, t, step);
      ckpt = std::min(ckpt * cfg.checkpoint_factor, cfg.horizon);
    } else {
      if (cfg.record_every > 0 && step % cfg.record_every == 0) emit(s, t, step);
      else mon.observe(s, t, step, nullptr);
    }
  }
  tr.checks = mon.checks;
  tr.theta_final = s.theta;
  return tr;
}

namespace {

void put(std::ostream& os, const std::optional<double>& v) {
  if (v && std::isfinite(*v)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    os << buf;
  }
}

}  // namespace

std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  os << "t,log_loss,rho,v,gamma,gamma_tilde,gamma_bar,gamma_hat,G_log,eps_t,sep,zeta,beta,kkt_eps,kkt_delta\n";
  for (const auto& r : tr.records) {
    put(os, r.t); os << ',';
    put(os, r.log_loss); os << ',';
    put(os, r.rho); os << ',';
    put(os, r.v); os << ',';
    put(os, r.gamma); os << ',';
    put(os, r.gamma_tilde); os << ',';
    put(os, r.gamma_bar); os << ',';
    put(os, r.gamma_hat); os << ',';
    put(os, r.G_log); os << ',';
    put(os, r.eps_t); os << ',';
    os << (r.sep ? 1 : 0) << ',';
    put(os, r.zeta); os << ',';
    put(os, r.beta); os << ',';
    put(os, r.kkt_eps); os << ',';
    put(os, r.kkt_delta); os << '\n';
  }
  return os.str();
}

void write_trajectory_csv(const Trajectory& tr, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write trajectory '" + path + "'");
  out << trajectory_csv(tr);
}

}  // namespace nh
