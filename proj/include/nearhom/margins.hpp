#pragma once

#include <optional>

#include "nearhom/network.hpp"
#include "nearhom/poly.hpp"

namespace nh {

/// phi = log(1/(n L)) from log L.
double link_phi(double log_loss, int n);

/// Phi(phi) = log phi - 2/phi. Sets *outside to true when phi <= 2, where the GD
/// analysis does not apply; the value is still returned when phi > 0.
double link_Phi(double phi, bool* outside = nullptr);

double normalized_margin(const LossEval& s, double rho, int M);
double gf_margin(const LossEval& s, int n, double rho, double pa_rho, int M);
double gf_margin(const LossEval& s, int n, double rho, const NonnegPoly& pa, int M);
double smoothed_margin(const LossEval& s, int n, double rho, int M);
/// exp(Phi(G))/rho^M with log G = p_a(rho) + log L. NaN when phi(G) <= 0. Sets *outside when
/// G >= 1/(n e^2).
double gd_margin(const LossEval& s, int n, double rho, double pa_rho, int M, bool* outside = nullptr);
double gd_margin(const LossEval& s, int n, double rho, const PiecewisePoly& pa, int M, bool* outside = nullptr);
/// (log n + p_a)/(phi - p_a); empty when the denominator is not positive.
std::optional<double> epsilon_t(const LossEval& s, int n, double pa_rho);

/// v = <grad L, -theta>. Also writes v/L, which survives underflow of L.
double radial_speed(const NetworkModel& model, const Vec& theta, const Dataset& data, double* v_over_loss = nullptr);

/// Bracket for v/L: M phi - p'(rho) <= v/L <= M log(1/L) + p'(rho).
struct SpeedBracket {
  double lower, upper;
};
SpeedBracket speed_bracket(const LossEval& s, int n, int M, double dp_rho);

struct MarginSnapshot {
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double gamma_bar = 0.0;
  double gamma_hat = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> eps_t;
  double phi_L = 0.0;
  double Phi_G = std::numeric_limits<double>::quiet_NaN();
  double G_log = 0.0;
  double pa_rho = 0.0;
  bool gd_outside = false;  ///< G >= 1/(n e^2)
};

/// pa_rho feeds gamma_tilde and eps_t; the GD fields use pa_gd_rho when present.
MarginSnapshot margin_snapshot(const LossEval& s, int n, double rho, int M, double pa_rho,
                               std::optional<double> pa_gd_rho = std::nullopt);

/// Relative disagreement between the log-domain margins and a naive evaluation through L
/// itself; empty when L underflows or overflows.
std::optional<double> naive_margin_disagreement(const LossEval& s, int n, double rho, int M, double pa_rho);

/// Sandwich gamma_tilde <= gamma_bar <= gamma <= (1 + eps) gamma_tilde with a relative slack.
bool sandwich_holds(const MarginSnapshot& m, double rel_slack = 1e-12);

}  // namespace nh
