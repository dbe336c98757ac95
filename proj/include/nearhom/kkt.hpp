#pragma once

#include <string>
#include <vector>

#include "nearhom/homogenization.hpp"

namespace nh {

/// Homogenized per-sample quantities at theta: margins y_i f_M(theta; x_i) and the
/// gradients y_i grad f_M(theta; x_i).
struct HomogenizedSamples {
  Vec margins;
  std::vector<Vec> grads;
  bool converged = true;
  std::string grad_source;  ///< "radial_limit" or "finite_difference"
};

HomogenizedSamples homogenize_samples(const NetworkModel& model, const Vec& theta, const Dataset& data, int M,
                                      const NonnegPoly& pa, const RadiusSchedule& sched = {});

/// h_M up to the positive factor L: sum_i w_i y_i grad f_M(theta; x_i), softmax weights from f.
Vec homogenized_direction(const LossEval& eval, const HomogenizedSamples& hs);

/// lambda_i = fM_min^{1 - 2/M} rho w_i / ||sum_j w_j y_j grad f_M,j||.
std::vector<double> compute_lambdas(const LossEval& eval, const HomogenizedSamples& hs, double rho, int M);

/// Cosine between theta and h_M.
double compute_beta(const Vec& theta, const Vec& h_dir);

struct KktReport {
  std::vector<double> lambdas;
  double beta = 0.0;
  double eps = 0.0;    ///< sqrt(2) B sqrt(1 - beta)
  double delta = 0.0;  ///< n B^2 (1 + 2 p_a(rho)) / (M fM_min)
  double B_const = 0.0;
  double B_t = 0.0;    ///< rho / fM_min^{1/M}, the time-varying alternative
  double eps_t = 0.0;  ///< eps with B_t in place of B
  double delta_t = 0.0;
  double fM_min = 0.0;
  double rescaled_point_norm = 0.0;
  double stationarity = 0.0;           ///< measured ||theta_hat - sum lambda_i grad fbar_M,i(theta_hat)||
  double stationarity_identity = 0.0;  ///< B_t sqrt(2 - 2 beta)
  double complementarity = 0.0;        ///< measured max lambda_i |fbar_M,i(theta_hat) - 1|
  double feasibility = 0.0;            ///< min_i fbar_M,i(theta_hat)
  bool converged = true;
  std::string grad_source;
};

/// Full certificate at theta_hat = theta / fM_min^{1/M}. B_const comes from the margin at
/// the separability time (gamma^{-1/M}); B_const <= 0 falls back to B_t. Throws kDomain when
/// fM_min <= 0.
KktReport kkt_residuals(const NetworkModel& model, const Vec& theta, const Dataset& data, int M,
                        const NonnegPoly& pa, double B_const, const RadiusSchedule& sched = {});

void to_json(nlohmann::json& j, const KktReport& r);

}  // namespace nh
