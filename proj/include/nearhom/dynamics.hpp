#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nearhom/margins.hpp"
#include "nearhom/network.hpp"

namespace nh {

enum class Mode { kGF, kGD };

/// Order M with network-level envelopes p, q for the inputs of a given dataset.
struct Certificate {
  int M = 1;
  NonnegPoly p, q;
  NonnegPoly pa_gf() const { return build_pa_gf(p, M); }
  PiecewisePoly pa_gd() const { return build_pa_gd(p, M); }
};

/// From the composed block certificate with ||x|| bounded by the dataset's largest input.
Certificate certificate_from_model(const NetworkModel& model, const Dataset& data);

struct DynamicsConfig {
  Mode mode = Mode::kGF;
  double eta = 1.0;            // GD step size
  long max_steps = 100000;     // GD
  double horizon = 1000.0;     // GF terminal time
  double gf_tolerance = 1e-8;  // local error per step, relative to 1 + ||theta||
  double gf_stability = 1.0;   // cap on h L (rho^{2M-2} + 1)
  double gf_max_step = std::numeric_limits<double>::infinity();
  double gf_first_checkpoint = 1e-2;
  std::optional<double> B;     // GD separability constant; heuristic when empty
  double A = 1.0;              // Hessian constant
  int record_every = 0;        // extra cadence in steps; 0 records at geometric checkpoints only
  double checkpoint_factor = 1.2;
  double monotonicity_tol = 1e-10;

  void validate() const;
};

/// Heuristic GD constant at radius rho, 2 B3^2 (rho^{M-1} + 1)^2 e^{-p_a(rho)} with
/// B3 = max(sum_i i q_i, 2 (sum_i i q_i)^2 + 2A).
double gd_constant_heuristic(const Certificate& cert, double A, double rho);

bool detect_separability_gf(const LossEval& s, int n, double rho, const NonnegPoly& pa);
bool detect_separability_gd(const LossEval& s, int n, double rho, const PiecewisePoly& pa_gd, double eta, double B);

/// Chord update of the direction; zeta grows by ||dir_new - prev_dir||.
struct DirectionState {
  Vec dir;  ///< empty until the first nonzero theta
  double zeta = 0.0;
};
void update_direction(DirectionState& st, const Vec& theta);

struct TrajectoryRecord {
  double t = 0.0;
  long step = 0;
  double log_loss = 0.0;
  double rho = 0.0;
  double v = 0.0;
  std::optional<double> gamma, gamma_tilde, gamma_bar, gamma_hat, eps_t;
  double G_log = 0.0;
  bool sep = false;
  double zeta = 0.0;
  std::optional<double> beta, kkt_eps, kkt_delta;
  Vec theta;
};

/// Streaming invariant counters, evaluated at every step.
struct RunChecks {
  std::optional<double> sep_time;
  long sep_step = -1;
  long steps = 0;
  long post_sep_steps = 0;
  long sep_violations = 0;
  long margin_violations = 0;  ///< drops of gamma_tilde (GF) or gamma_hat (GD) beyond tol
  double worst_margin_drop = 0.0;
  long rho_violations = 0;
  long speed_violations = 0;  ///< v <= 0 or outside the bracket
  long loss_violations = 0;   ///< GD loss increases after s
  long sandwich_violations = 0;
  long gd_outside_steps = 0;  ///< post-s GD steps with G >= 1/(n e^2)
  std::optional<double> eps_at_sep, eps_final;
  std::optional<double> margin_at_sep;  ///< gamma_tilde (GF) or gamma_hat (GD) at s
  double min_log_loss = std::numeric_limits<double>::infinity();
  double max_theta_coeff = -std::numeric_limits<double>::infinity();
  std::string first_violation;  ///< empty when none
  long rejected_steps = 0;      ///< GF error-control rejections
  double min_step = std::numeric_limits<double>::infinity();
  bool ok() const {
    return sep_violations == 0 && margin_violations == 0 && rho_violations == 0 && speed_violations == 0 &&
           loss_violations == 0 && sandwich_violations == 0;
  }
};

struct Trajectory {
  Mode mode = Mode::kGF;
  int M = 1;
  std::vector<TrajectoryRecord> records;
  RunChecks checks;
  Vec theta_final;
};

/// theta with its loss evaluation and sum_i w_i y_i grad f_i (grad L = -L dir).
struct FlowState {
  Vec theta;
  LossEval eval;
  Vec dir;
  double rho = 0.0;
};
FlowState evaluate_state(const NetworkModel& model, const Dataset& data, Vec theta);

/// Per-step invariant checks shared by GD, GF and the reduced toy flow. Feed every accepted
/// state in time order; pass a record to also fill the diagnostic columns.
class InvariantMonitor {
 public:
  InvariantMonitor(const Dataset& data, const Certificate& cert, const DynamicsConfig& cfg);
  void observe(const FlowState& s, double t, long step, TrajectoryRecord* rec);
  RunChecks checks;

 private:
  void flag(long& counter, const char* what, double t);
  int n_;
  Certificate cert_;
  DynamicsConfig cfg_;
  NonnegPoly pa_gf_;
  PiecewisePoly pa_gd_;
  NonnegPoly dp_;
  double prev_margin_ = 0.0, prev_rho_ = 0.0, prev_log_loss_ = 0.0;
};

Trajectory run_gd(const NetworkModel& model, const Dataset& data, const Vec& theta0, const Certificate& cert,
                  const DynamicsConfig& cfg);
Trajectory run_gf(const NetworkModel& model, const Dataset& data, const Vec& theta0, const Certificate& cert,
                  const DynamicsConfig& cfg);

void write_trajectory_csv(const Trajectory& tr, const std::string& path);
std::string trajectory_csv(const Trajectory& tr);

}  // namespace nh
