#include "nearhom/margins.hpp"

#include <cmath>

#include "nearhom/errors.hpp"

namespace nh {

namespace {

double power_norm(double rho, int M) {
  require(rho > 0.0, ErrorCode::kDomain, "margins need a nonzero parameter vector");
  return std::pow(rho, M);
}

}  // namespace

double link_phi(double log_loss, int n) { return -std::log(static_cast<double>(n)) - log_loss; }

double link_Phi(double phi, bool* outside) {
  if (outside) *outside = phi <= 2.0;
  if (phi <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::log(phi) - 2.0 / phi;
}

double normalized_margin(const LossEval& s, double rho, int M) { return s.min_margin / power_norm(rho, M); }

double gf_margin(const LossEval& s, int n, double rho, double pa_rho, int M) {
  return (link_phi(s.log_loss, n) - pa_rho) / power_norm(rho, M);
}

double gf_margin(const LossEval& s, int n, double rho, const NonnegPoly& pa, int M) {
  return gf_margin(s, n, rho, pa(rho), M);
}

double smoothed_margin(const LossEval& s, int n, double rho, int M) {
  return link_phi(s.log_loss, n) / power_norm(rho, M);
}

double gd_margin(const LossEval& s, int n, double rho, double pa_rho, int M, bool* outside) {
  double phi_g = link_phi(s.log_loss + pa_rho, n);
  bool out = false;
  double Phi = link_Phi(phi_g, &out);
  if (outside) *outside = out;
  if (!(phi_g > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::exp(Phi) / power_norm(rho, M);
}

double gd_margin(const LossEval& s, int n, double rho, const PiecewisePoly& pa, int M, bool* outside) {
  return gd_margin(s, n, rho, pa(rho), M, outside);
}

std::optional<double> epsilon_t(const LossEval& s, int n, double pa_rho) {
  double den = link_phi(s.log_loss, n) - pa_rho;
  if (!(den > 0.0)) return std::nullopt;
  return (std::log(static_cast<double>(n)) + pa_rho) / den;
}

double radial_speed(const NetworkModel& model, const Vec& theta, const Dataset& data, double* v_over_loss) {
  LossEval e;
  Vec dir = loss_grad_direction(model, theta, data, &e);
  double vl = dir.dot(theta);
  if (v_over_loss) *v_over_loss = vl;
  return e.loss * vl;
}

SpeedBracket speed_bracket(const LossEval& s, int n, int M, double dp_rho) {
  return {M * link_phi(s.log_loss, n) - dp_rho, -M * s.log_loss + dp_rho};
}

MarginSnapshot margin_snapshot(const LossEval& s, int n, double rho, int M, double pa_rho,
                               std::optional<double> pa_gd_rho) {
  MarginSnapshot m;
  m.pa_rho = pa_rho;
  m.phi_L = link_phi(s.log_loss, n);
  m.gamma = normalized_margin(s, rho, M);
  m.gamma_bar = smoothed_margin(s, n, rho, M);
  m.gamma_tilde = gf_margin(s, n, rho, pa_rho, M);
  m.eps_t = epsilon_t(s, n, pa_rho);
  if (pa_gd_rho) {
    m.G_log = *pa_gd_rho + s.log_loss;
    m.gamma_hat = gd_margin(s, n, rho, *pa_gd_rho, M, &m.gd_outside);
    m.Phi_G = link_Phi(link_phi(m.G_log, n));
  } else {
    m.G_log = pa_rho + s.log_loss;
  }
  return m;
}

std::optional<double> naive_margin_disagreement(const LossEval& s, int n, double rho, int M, double pa_rho) {
  if (!(s.loss > std::numeric_limits<double>::min()) || !std::isfinite(s.loss)) return std::nullopt;
  double naive_loss = 0.0;
  for (int i = 0; i < s.margins.size(); ++i) naive_loss += std::exp(-s.margins[i]);
  naive_loss /= n;
  if (!(naive_loss > std::numeric_limits<double>::min()) || !std::isfinite(naive_loss)) return std::nullopt;
  double rm = std::pow(rho, M);
  double phi_naive = std::log(1.0 / (n * naive_loss));
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
  worst = std::max(worst, rel(phi_naive / rm, smoothed_margin(s, n, rho, M)));
  worst = std::max(worst, rel((phi_naive - pa_rho) / rm, gf_margin(s, n, rho, pa_rho, M)));
  return worst;
}

bool sandwich_holds(const MarginSnapshot& m, double rel_slack) {
  if (!m.eps_t) return false;
  double scale = rel_slack * (1.0 + std::abs(m.gamma) + std::abs(m.gamma_bar));
  double upper = (1.0 + *m.eps_t) * m.gamma_tilde;
  return m.gamma_tilde <= m.gamma_bar + scale && m.gamma_bar <= m.gamma + scale && m.gamma <= upper + scale;
}

}  // namespace nh
