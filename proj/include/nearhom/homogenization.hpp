#pragma once

#include <vector>

#include "nearhom/network.hpp"

namespace nh {

/// Geometric radius ladder r0 * growth^k with a plateau stop.
struct RadiusSchedule {
  double r0 = 4.0;
  double growth = 2.0;
  int max_stages = 40;
  double rel_tol = 1e-11;
  double abs_tol = 1e-12;
};

struct HomogenizationEstimate {
  double value = 0.0;
  std::vector<double> radii;
  std::vector<double> residuals;     ///< |g(r_{k+1}) - g(r_k)|
  double certified_tolerance = 0.0;  ///< p_a(r ||theta||) / r^M at the last radius
  bool converged = false;            ///< plateau reached before max_stages
  bool backed_off = false;           ///< stopped early on a non-finite evaluation
};

/// f_M(theta; x) = lim f(r theta; x) / r^M.
HomogenizationEstimate estimate_fM(const NetworkModel& model, const Vec& theta, const Vec& x, int M,
                                   const NonnegPoly& pa, const RadiusSchedule& sched = {});

/// (grad f)_M = lim grad f(r theta; x) / r^{M-1}.
struct GradientEstimate {
  Vec value;
  int stages = 0;
  bool converged = false;
};
GradientEstimate estimate_gradM(const NetworkModel& model, const Vec& theta, const Vec& x, int M,
                                const RadiusSchedule& sched = {});

/// Max over parameter samples and data of |f - f_M| - p_a(||theta||), raw and after
/// subtracting the estimator tolerance.
struct ErrorBoundReport {
  double max_residual = -std::numeric_limits<double>::infinity();
  double max_certified_residual = -std::numeric_limits<double>::infinity();
  double max_abs_residual = 0.0;  ///< max | |f - f_M| - p_a |
  int evaluations = 0;
  int unconverged = 0;
  bool ok() const { return max_certified_residual <= 0.0; }
};
ErrorBoundReport check_error_bound(const NetworkModel& model, const std::vector<Vec>& thetas, const Dataset& data,
                                   int M, const NonnegPoly& pa, const RadiusSchedule& sched = {}, int threads = 1);

/// Composition of per-block limits s_M(theta_i; h) = lim s(r theta_i; r h) / r^{M1+M2}.
struct BlockwiseEstimate {
  double value = 0.0;
  bool converged = true;
};
BlockwiseEstimate blockwise_homogenize(const NetworkModel& model, const Vec& theta, const Vec& x,
                                       const RadiusSchedule& sched = {});

/// Smallest c (geometric search, then bisection) with
/// gamma' c^M >= 2 p_a(c ||theta'||) + log n + slack.
double separability_scale(double fM_margin, const NonnegPoly& pa, int M, int n, double slack,
                          double theta_norm = 1.0, double c_min = 1e-6);

struct LeadingComponentReport {
  double min_value = 0.0;  ///< min_j y_j f_M(theta_s; x_j)
  int argmin = 0;
  bool positive() const { return min_value > 0.0; }
};
LeadingComponentReport leading_component_positive(const NetworkModel& model, const Vec& theta_s, const Dataset& data,
                                                  int M, const NonnegPoly& pa, const RadiusSchedule& sched = {});

/// f_M at every sample point, +-1 labels applied.
Vec homogenized_margins(const NetworkModel& model, const Vec& theta, const Dataset& data, int M,
                        const NonnegPoly& pa, const RadiusSchedule& sched = {});

}  // namespace nh
