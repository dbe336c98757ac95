#pragma once

#include <cstdint>
#include <random>

#include "nearhom/network.hpp"

namespace nh {

/// Uniform draw from the Euclidean ball of the given radius.
Vec sample_in_ball(std::mt19937_64& rng, int dim, double radius);

/// Sampled check of the three near-M-homogeneity inequalities. Each max_* is the largest
/// value of (lhs - bound); nonpositive means no violation was found on the samples.
struct NearHomReport {
  double max_a1 = -std::numeric_limits<double>::infinity();  ///< |<grad f, theta> - M f| - p'(|theta|)
  double max_a2 = -std::numeric_limits<double>::infinity();  ///< |grad f| - q'(|theta|)
  double max_a3 = -std::numeric_limits<double>::infinity();  ///< |f| - q(|theta|)
  int samples = 0;
  int evaluations = 0;
  int violations = 0;  ///< residuals above roundoff (1e-9 relative to the bound)
  bool ok() const { return violations == 0; }
};

NearHomReport verify_near_homogeneity(const NetworkModel& model, const Dataset& data, int M, const NonnegPoly& p,
                                      const NonnegPoly& q, int samples, double radius, std::uint64_t seed = 0,
                                      int threads = 1);

/// Sampled check of the dual inequalities for one block, componentwise bounds replaced by
/// the stronger Euclidean/operator-norm forms.
struct DualHomReport {
  double max_b1_param = -std::numeric_limits<double>::infinity();
  double max_b1_input = -std::numeric_limits<double>::infinity();
  double max_b2_param = -std::numeric_limits<double>::infinity();
  double max_b2_input = -std::numeric_limits<double>::infinity();
  double max_b3 = -std::numeric_limits<double>::infinity();
  int samples = 0;
  int violations = 0;
  bool ok() const { return violations == 0; }
};

DualHomReport verify_dual_homogeneity(const Block& block, const OrderDescriptor& order, int samples,
                                      double param_radius, double input_radius, std::uint64_t seed = 0,
                                      int threads = 1);

/// Dense Jacobians of a block at (theta, x): rows are outputs.
void block_jacobians(const Block& block, const double* theta, const Vec& x, Mat& j_param, Mat& j_input);

}  // namespace nh
