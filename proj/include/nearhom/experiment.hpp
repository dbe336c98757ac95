#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nearhom/dynamics.hpp"
#include "nearhom/homogenization.hpp"
#include "nearhom/toy.hpp"

namespace nh {

enum class RunMode { kGF, kGD, kReducedODE };

/// One experiment, loaded from YAML (canonical) or JSON. Unknown keys are rejected.
struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  nlohmann::json model;  ///< {"input_dim", "blocks"}; ignored in reduced mode

  // dataset: generator "symmetric" (toy construction), a CSV file, or inline points
  std::string dataset_source = "generator";
  std::string dataset_path;
  nlohmann::json dataset_points;  ///< [[x1..xd, y], ...]
  int gen_d = 2, gen_n = 8;
  double gen_gamma_star = 0.5;

  std::optional<int> declared_M;  ///< empty means "auto"
  std::optional<NonnegPoly> declared_p, declared_q;

  RunMode mode = RunMode::kGF;
  DynamicsConfig dynamics;
  ToyConfig toy;

  std::string init = "zeros";  ///< "zeros", "random" or "given"
  double init_scale = 0.1;
  std::vector<double> theta0;

  int verify_samples = 200;
  double verify_radius = 2.0;
  int homogenization_samples = 100;
  double homogenization_radius = 2.0;
  bool kkt = true;
  bool fit_rates = false;
  double fit_from_decade = 0.0;  ///< fit window starts at t_end / 10^k; 0 means the last decade

  std::optional<bool> expect_separable;
  std::optional<double> expect_log_loss_floor;  ///< log_loss >= floor - floor_tol at every step
  double expect_floor_tol = 1e-3;
  std::optional<double> expect_theta_max;       ///< every coordinate <= this at every step

  std::string out_dir = ".";
  std::string trajectory_file = "trajectory.csv";
  std::string summary_file = "summary.json";
  int threads = 1;

  nlohmann::json source;  ///< config as loaded, echoed into the summary
};

ExperimentConfig parse_config(const nlohmann::json& j);
/// Picks the parser from the extension: .yaml/.yml or .json.
ExperimentConfig load_config(const std::string& path);
nlohmann::json yaml_file_to_json(const std::string& path);

struct RateFit {
  double loss_slope = 0.0;
  double r_squared = 0.0;
  double norm_band_min = 0.0, norm_band_max = 0.0;  ///< extremes of rho^M / log t
  double window_start = 0.0, window_end = 0.0;
  int points = 0;
  double norm_ratio() const { return norm_band_max / norm_band_min; }
};

/// Least squares of log_loss + (2 - 2/M) log log t against log t over [t_end/10, t_end]
/// (or the given start). GD records already carry t = eta * step.
RateFit fit_rates(const std::vector<TrajectoryRecord>& records, int M, std::optional<double> window_start = {},
                  std::optional<double> sep_time = {});
RateFit fit_rates_csv(const std::string& path, int M, std::optional<double> window_start = {});
void to_json(nlohmann::json& j, const RateFit& r);

struct ExperimentResult {
  nlohmann::json summary;
  Trajectory trajectory;
  bool passed = false;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);
/// Independent configs in parallel; results come back in input order.
std::vector<ExperimentResult> run_experiments(const std::vector<ExperimentConfig>& cfgs, int threads);

/// Human-readable pass/fail listing built from a summary JSON. Returns true when all pass.
bool emit_report(const nlohmann::json& summary, std::string& text);

/// Dataset described by the config (generated, read, or inline).
Dataset build_dataset(const ExperimentConfig& cfg);
NetworkModel build_model(const ExperimentConfig& cfg);
Certificate build_certificate(const ExperimentConfig& cfg, const NetworkModel& model, const Dataset& data);

}  // namespace nh
