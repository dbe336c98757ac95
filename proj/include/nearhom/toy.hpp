#pragma once

#include <cstdint>
#include <vector>

#include "nearhom/dynamics.hpp"

namespace nh {

struct ToyConfig {
  int d = 2;
  int n = 8;
  double gamma_star = 0.5;
  double alpha_L = 0.5;
  double horizon = 1e5;
  double rk_tolerance = 1e-9;
  double max_step = 1.0;         // keeps at least `horizon` accepted steps
  double first_checkpoint = 1e-2;
  double checkpoint_factor = 1.2;
  std::uint64_t seed = 7;

  double c_L() const { return 0.5 * (1.0 + alpha_L); }
  void validate() const;
};

struct ToyDataset {
  Dataset data;
  Vec w_star;  ///< unit vector with min_i y_i x_i.w_star >= gamma_star
};

/// Half the samples drawn in the slab y x.w* >= gamma_star inside the unit ball, the other
/// half their negations (x_{i+n/2}, y_{i+n/2}) = -(x_i, y_i).
ToyDataset gen_symmetric_dataset(int d, int n, double gamma_star, std::uint64_t seed);

/// f = w1.x + w2.x + a1 phi(w1.x) - a2 phi(-w2.x), phi(z) = max(z, alpha z); theta = (w1, w2, a1, a2).
double toy_forward(const Vec& theta, const Vec& x, double alpha_L);
NetworkModel toy_model(int d, double alpha_L);
/// Network-level certificate for inputs with ||x|| <= x_max: M = 2, p = x_max u^2 / sqrt 2.
Certificate toy_certificate(double x_max);

/// Reduced symmetric state z = (w, a); the full parameters are (w, w, a, a).
Vec toy_full_params(const Vec& z);
/// d/dt (w, a) for f = (2 + 2 c_L a) w.x.
Vec reduced_ode_rhs(const Vec& z, const Dataset& data, double c_L);
/// (a + 1/c_L)^2 - ||w||^2 - 1/c_L^2
double balancing_residual(const Vec& z, double c_L);

struct ToyExtra {
  double w_norm = 0.0;
  double a = 0.0;
  double balancing = 0.0;
};

// Absolute balancing budget per unit of local tolerance: 1e-6 at rk_tolerance 1e-9.
inline constexpr double kBalancingFactor = 1e3;

struct ToyRun {
  Trajectory traj;            ///< records at geometric checkpoints, plus t0
  std::vector<ToyExtra> extra;  ///< parallel to traj.records
  double max_abs_balancing = 0.0;
  long balancing_violations = 0;  ///< |residual| > kBalancingFactor * rk_tolerance
  double min_a = 0.0;
  long loss_bound_violations = 0;
  long norm_lower_violations = 0;
  long norm_upper_violations = 0;
  double w_norm_t0 = 0.0;
  long steps = 0;
  long rejected = 0;
};

/// RK4 with step doubling from (w, a) = 0; every accepted step is fed to the invariant
/// monitor and the toy bounds.
ToyRun run_reduced_ode(const ToyConfig& cfg, const Dataset& data);

/// t0 = max{16, ((4/gamma) log(4/gamma))^4}
double toy_t0(double gamma_star);
double toy_loss_bound(double T, double gamma_star);

struct ToyBoundReport {
  struct Row {
    double t;
    bool loss_ok, norm_lower_ok, norm_upper_ok;  // true outside the validity domain
  };
  std::vector<Row> rows;
  std::optional<double> first_violation;
  double t0 = 0.0;
  bool ok() const { return !first_violation; }
};
ToyBoundReport toy_bound_checks(const ToyRun& run, const ToyConfig& cfg);

}  // namespace nh
