#include "nearhom/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "nearhom/errors.hpp"
#include "nearhom/kkt.hpp"
#include "nearhom/margins.hpp"
#include "nearhom/parallel.hpp"
#include "nearhom/verify.hpp"

namespace nh {

using nlohmann::json;

namespace {

constexpr const char* kKinkConvention = "right derivative at kinks: relu'(0) = 1, leaky'(0) = 1, sign(0) = +1";

json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& item : n) a.push_back(yaml_to_json(item));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return o;
    }
    case YAML::NodeType::Scalar: {
      const std::string& s = n.Scalar();
      if (n.Tag() == "!") return s;  // quoted
      long long i;
      double d;
      bool b;
      if (YAML::convert<long long>::decode(n, i)) return i;
      if (YAML::convert<double>::decode(n, d)) return d;
      if (YAML::convert<bool>::decode(n, b)) return b;
      if (s == "~" || s == "null") return nullptr;
      return s;
    }
  }
  return nullptr;
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  require(j.is_object(), ErrorCode::kInvalidArgument, "'" + where + "' must be a mapping");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    require(allowed.count(k) > 0, ErrorCode::kInvalidArgument, "unknown key '" + k + "' in '" + where + "'");
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::kInvalidArgument, std::string("bad value for '") + key + "'");
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

json yaml_file_to_json(const std::string& path) {
  try {
    return yaml_to_json(YAML::LoadFile(path));
  } catch (const YAML::BadFile&) {
    fail(ErrorCode::kIo, "cannot open config '" + path + "'");
  } catch (const YAML::Exception& e) {
    fail(ErrorCode::kInvalidArgument, "YAML error in '" + path + "': " + e.what());
  }
}

ExperimentConfig parse_config(const json& j) {
  only_keys(j, "config", {"name", "seed", "model", "dataset", "order", "dynamics", "init", "checks", "expect", "output"});
  ExperimentConfig c;
  c.source = j;
  get_if(j, "name", c.name);
  get_if(j, "seed", c.seed);
  if (j.contains("model")) c.model = j.at("model");

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    only_keys(d, "dataset", {"source", "path", "points", "d", "n", "gamma_star"});
    get_if(d, "source", c.dataset_source);
    get_if(d, "path", c.dataset_path);
    if (d.contains("points")) c.dataset_points = d.at("points");
    get_if(d, "d", c.gen_d);
    get_if(d, "n", c.gen_n);
    get_if(d, "gamma_star", c.gen_gamma_star);
    require(c.dataset_source == "generator" || c.dataset_source == "file" || c.dataset_source == "inline",
            ErrorCode::kInvalidArgument, "dataset.source must be generator, file or inline");
  }

  if (j.contains("order")) {
    const json& o = j.at("order");
    only_keys(o, "order", {"M", "p", "q"});
    if (o.contains("M") && !(o.at("M").is_string() && o.at("M").get<std::string>() == "auto")) {
      require(o.at("M").is_number_integer(), ErrorCode::kInvalidArgument, "order.M must be an integer or 'auto'");
      c.declared_M = o.at("M").get<int>();
    }
    if (o.contains("p")) c.declared_p = o.at("p").get<NonnegPoly>();
    if (o.contains("q")) c.declared_q = o.at("q").get<NonnegPoly>();
  }

  if (j.contains("dynamics")) {
    const json& d = j.at("dynamics");
    only_keys(d, "dynamics", {"mode", "eta", "max_steps", "horizon", "gf_tolerance", "gf_max_step", "gf_stability",
                              "B", "A", "record_every", "checkpoint_factor", "first_checkpoint", "monotonicity_tol",
                              "rk_tolerance", "max_step", "alpha_L"});
    std::string mode = "GF";
    get_if(d, "mode", mode);
    mode = lower(mode);
    if (mode == "gf") c.mode = RunMode::kGF;
    else if (mode == "gd") c.mode = RunMode::kGD;
    else if (mode == "reduced" || mode == "reduced_ode") c.mode = RunMode::kReducedODE;
    else fail(ErrorCode::kInvalidArgument, "dynamics.mode must be GF, GD or reduced");
    DynamicsConfig& dc = c.dynamics;
    dc.mode = c.mode == RunMode::kGD ? Mode::kGD : Mode::kGF;
    get_if(d, "eta", dc.eta);
    get_if(d, "max_steps", dc.max_steps);
    get_if(d, "horizon", dc.horizon);
    get_if(d, "gf_tolerance", dc.gf_tolerance);
    get_if(d, "gf_max_step", dc.gf_max_step);
    get_if(d, "gf_stability", dc.gf_stability);
    if (d.contains("B") && !d.at("B").is_null()) dc.B = d.at("B").get<double>();
    get_if(d, "A", dc.A);
    get_if(d, "record_every", dc.record_every);
    get_if(d, "checkpoint_factor", dc.checkpoint_factor);
    get_if(d, "first_checkpoint", dc.gf_first_checkpoint);
    get_if(d, "monotonicity_tol", dc.monotonicity_tol);
    c.toy.horizon = dc.horizon;
    c.toy.checkpoint_factor = dc.checkpoint_factor;
    c.toy.first_checkpoint = dc.gf_first_checkpoint;
    get_if(d, "rk_tolerance", c.toy.rk_tolerance);
    get_if(d, "max_step", c.toy.max_step);
    get_if(d, "alpha_L", c.toy.alpha_L);
  }

  if (j.contains("init")) {
    const json& i = j.at("init");
    only_keys(i, "init", {"kind", "scale", "theta0"});
    get_if(i, "kind", c.init);
    get_if(i, "scale", c.init_scale);
    get_if(i, "theta0", c.theta0);
    if (i.contains("theta0") && !i.contains("kind")) c.init = "given";
    require(c.init == "zeros" || c.init == "random" || c.init == "given", ErrorCode::kInvalidArgument,
            "init.kind must be zeros, random or given");
  }

  if (j.contains("checks")) {
    const json& k = j.at("checks");
    only_keys(k, "checks", {"verify_samples", "verify_radius", "homogenization_samples", "homogenization_radius",
                            "kkt", "rates", "fit_from_decade"});
    get_if(k, "verify_samples", c.verify_samples);
    get_if(k, "verify_radius", c.verify_radius);
    get_if(k, "homogenization_samples", c.homogenization_samples);
    get_if(k, "homogenization_radius", c.homogenization_radius);
    get_if(k, "kkt", c.kkt);
    get_if(k, "rates", c.fit_rates);
    get_if(k, "fit_from_decade", c.fit_from_decade);
  }

  if (j.contains("expect")) {
    const json& e = j.at("expect");
    only_keys(e, "expect", {"separable", "log_loss_floor", "floor_tol", "theta_max"});
    if (e.contains("separable")) c.expect_separable = e.at("separable").get<bool>();
    if (e.contains("log_loss_floor")) c.expect_log_loss_floor = e.at("log_loss_floor").get<double>();
    get_if(e, "floor_tol", c.expect_floor_tol);
    if (e.contains("theta_max")) c.expect_theta_max = e.at("theta_max").get<double>();
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    only_keys(o, "output", {"dir", "trajectory", "summary"});
    get_if(o, "dir", c.out_dir);
    get_if(o, "trajectory", c.trajectory_file);
    get_if(o, "summary", c.summary_file);
  }

  c.toy.seed = c.seed;
  c.toy.d = c.gen_d;
  c.toy.n = c.gen_n;
  c.toy.gamma_star = c.gen_gamma_star;
  if (c.mode != RunMode::kReducedODE)
    require(c.model.is_object(), ErrorCode::kInvalidArgument, "config needs a 'model' section");
  require(c.verify_samples >= 0 && c.homogenization_samples >= 0, ErrorCode::kInvalidArgument,
          "sample counts must be nonnegative");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string ext = lower(std::filesystem::path(path).extension().string());
  json j;
  if (ext == ".yaml" || ext == ".yml") {
    j = yaml_file_to_json(path);
  } else {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config '" + path + "'");
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(ErrorCode::kInvalidArgument, "JSON error in '" + path + "': " + e.what());
    }
  }
  ExperimentConfig c = parse_config(j);
  // Relative dataset paths resolve against the config's directory.
  if (c.dataset_source == "file" && !c.dataset_path.empty() && std::filesystem::path(c.dataset_path).is_relative())
    c.dataset_path = (std::filesystem::path(path).parent_path() / c.dataset_path).string();
  return c;
}

Dataset build_dataset(const ExperimentConfig& c) {
  if (c.dataset_source == "file") return dataset_from_csv(c.dataset_path);
  if (c.dataset_source == "inline") {
    require(c.dataset_points.is_array() && !c.dataset_points.empty(), ErrorCode::kInvalidArgument,
            "inline dataset needs a nonempty 'points' list");
    auto rows = c.dataset_points.get<std::vector<std::vector<double>>>();
    const std::size_t cols = rows.front().size();
    require(cols >= 2, ErrorCode::kInvalidArgument, "inline points are [x1, ..., xd, y]");
    Dataset d;
    d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols - 1));
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].size() == cols, ErrorCode::kDimensionMismatch, "ragged inline dataset");
      for (std::size_t k = 0; k + 1 < cols; ++k) d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
      d.y[static_cast<Eigen::Index>(i)] = rows[i].back();
    }
    d.validate();
    return d;
  }
  return gen_symmetric_dataset(c.gen_d, c.gen_n, c.gen_gamma_star, c.seed).data;
}

NetworkModel build_model(const ExperimentConfig& c) {
  if (c.mode == RunMode::kReducedODE) return toy_model(c.toy.d, c.toy.alpha_L);
  return network_from_json(c.model);
}

Certificate build_certificate(const ExperimentConfig& c, const NetworkModel& model, const Dataset& data) {
  Certificate auto_cert = certificate_from_model(model, data);
  Certificate cert = auto_cert;
  if (c.declared_M) {
    cert.M = *c.declared_M;
    if (!c.declared_p || !c.declared_q)
      require(cert.M == auto_cert.M, ErrorCode::kInvalidArgument,
              "declared M differs from the composed order; give p and q explicitly");
  }
  if (c.declared_p) cert.p = *c.declared_p;
  if (c.declared_q) cert.q = *c.declared_q;
  require(cert.p.degree() <= cert.M && cert.q.degree() <= cert.M, ErrorCode::kInvalidArgument,
          "envelope degree exceeds the declared order");
  return cert;
}

RateFit fit_rates(const std::vector<TrajectoryRecord>& records, int M, std::optional<double> window_start,
                  std::optional<double> sep_time) {
  require(M >= 1, ErrorCode::kInvalidArgument, "order must be positive");
  require(!records.empty(), ErrorCode::kInvalidArgument, "empty trajectory");
  double t_end = records.back().t;
  double start = window_start ? *window_start : t_end / 10.0;
  require(t_end >= 10.0 * start && start > 1.0, ErrorCode::kInvalidArgument,
          "fit window must span at least one decade with t > 1");
  if (sep_time)
    require(start >= *sep_time, ErrorCode::kInvalidArgument, "trajectory does not extend a decade past separability");
  const double corr = 2.0 - 2.0 / M;
  std::vector<double> xs, ys;
  RateFit fit;
  fit.norm_band_min = std::numeric_limits<double>::infinity();
  fit.norm_band_max = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    if (r.t < start || r.t > t_end) continue;
    double lt = std::log(r.t);
    xs.push_back(lt);
    ys.push_back(r.log_loss + corr * std::log(lt));
    double band = std::pow(r.rho, M) / lt;
    fit.norm_band_min = std::min(fit.norm_band_min, band);
    fit.norm_band_max = std::max(fit.norm_band_max, band);
  }
  require(xs.size() >= 3, ErrorCode::kInvalidArgument, "fit window holds fewer than 3 records");
  Eigen::Map<const Vec> X(xs.data(), static_cast<Eigen::Index>(xs.size()));
  Eigen::Map<const Vec> Y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  double mx = X.mean(), my = Y.mean();
  Vec dx = X.array() - mx, dy = Y.array() - my;
  double sxx = dx.squaredNorm(), syy = dy.squaredNorm();
  fit.loss_slope = dx.dot(dy) / sxx;
  double ss_res = (dy - fit.loss_slope * dx).squaredNorm();
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.window_start = start;
  fit.window_end = t_end;
  fit.points = static_cast<int>(xs.size());
  return fit;
}

RateFit fit_rates_csv(const std::string& path, int M, std::optional<double> window_start) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open trajectory '" + path + "'");
  std::string line;
  std::getline(in, line);
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) head.push_back(cell);
  }
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < head.size(); ++i)
      if (head[i] == name) return static_cast<int>(i);
    fail(ErrorCode::kInvalidArgument, "trajectory lacks column '" + name + "'");
  };
  int ct = col("t"), cl = col("log_loss"), cr = col("rho");
  std::vector<TrajectoryRecord> recs;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) <= std::max({ct, cl, cr})) continue;
    TrajectoryRecord r;
    r.t = std::stod(cells[ct]);
    r.log_loss = std::stod(cells[cl]);
    r.rho = std::stod(cells[cr]);
    recs.push_back(r);
  }
  return fit_rates(recs, M, window_start);
}

void to_json(json& j, const RateFit& r) {
  j = json{{"loss_slope", r.loss_slope}, {"r_squared", r.r_squared},   {"norm_band", {r.norm_band_min, r.norm_band_max}},
           {"norm_ratio", r.norm_ratio()}, {"window", {r.window_start, r.window_end}}, {"points", r.points}};
}

namespace {

struct Inventory {
  json items = json::array();
  bool all = true;
  void add(const std::string& check, const std::string& tolerance, bool passed, json detail = json::object()) {
    items.push_back({{"check", check}, {"tolerance", tolerance}, {"passed", passed}, {"detail", std::move(detail)}});
    all = all && passed;
  }
};

json checks_json(const RunChecks& c) {
  json j{{"steps", c.steps},
         {"post_sep_steps", c.post_sep_steps},
         {"sep_violations", c.sep_violations},
         {"margin_violations", c.margin_violations},
         {"worst_margin_drop", c.worst_margin_drop},
         {"rho_violations", c.rho_violations},
         {"speed_violations", c.speed_violations},
         {"loss_violations", c.loss_violations},
         {"sandwich_violations", c.sandwich_violations},
         {"gd_outside_steps", c.gd_outside_steps},
         {"rejected_steps", c.rejected_steps},
         {"min_log_loss", c.min_log_loss},
         {"max_theta_coeff", c.max_theta_coeff},
         {"first_violation", c.first_violation}};
  j["sep_time"] = c.sep_time ? json(*c.sep_time) : json(nullptr);
  j["sep_step"] = c.sep_step;
  j["eps_at_sep"] = c.eps_at_sep ? json(*c.eps_at_sep) : json(nullptr);
  j["eps_final"] = c.eps_final ? json(*c.eps_final) : json(nullptr);
  j["margin_at_sep"] = c.margin_at_sep ? json(*c.margin_at_sep) : json(nullptr);
  if (std::isfinite(c.min_step)) j["min_step"] = c.min_step;
  return j;
}

Vec initial_theta(const ExperimentConfig& c, int dim) {
  if (c.init == "given") {
    require(static_cast<int>(c.theta0.size()) == dim, ErrorCode::kDimensionMismatch,
            "init.theta0 has " + std::to_string(c.theta0.size()) + " entries, model needs " + std::to_string(dim));
    return Eigen::Map<const Vec>(c.theta0.data(), dim);
  }
  if (c.init == "random") {
    std::mt19937_64 rng(item_seed(c.seed, 0x1417));
    std::normal_distribution<double> normal;
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = c.init_scale * normal(rng);
    return v;
  }
  return Vec::Zero(dim);
}

template <class F>
bool stage(json& stages, const std::string& name, F&& body) {
  auto t0 = std::chrono::steady_clock::now();
  try {
    json info = body();
    info["status"] = info.value("status", "done");
    info["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages[name] = std::move(info);
    return true;
  } catch (const std::exception& e) {
    stages[name] = {{"status", "error"}, {"message", e.what()}};
    return false;
  }
}

// Largest beta over records with t in [lo, hi].
std::optional<double> window_max_beta(const std::vector<TrajectoryRecord>& recs, double lo, double hi) {
  std::optional<double> best;
  for (const auto& r : recs)
    if (r.beta && r.t >= lo && r.t <= hi) best = best ? std::max(*best, *r.beta) : *r.beta;
  return best;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res;
  json& S = res.summary;
  S["name"] = cfg.name;
  S["seed"] = cfg.seed;
  S["config"] = cfg.source;
  S["kink_convention"] = kKinkConvention;
  json stages = json::object();
  Inventory inv;

  std::optional<NetworkModel> model;
  std::optional<Dataset> data;
  Certificate cert;
  bool ok = stage(stages, "setup", [&] {
    data = build_dataset(cfg);
    model = build_model(cfg);
    return json{{"n", data->n()}, {"d", data->d()}, {"param_dim", model->dim()}};
  });

  ok = ok && stage(stages, "orders", [&] {
    cert = build_certificate(cfg, *model, *data);
    OrderDescriptor o = model->order();
    json j{{"M", cert.M},           {"composed_order", {o.m_param, o.m_input}}, {"p", cert.p},
           {"q", cert.q},           {"pa_gf", cert.pa_gf()},                    {"x_max", data->max_norm()},
           {"declared", cfg.declared_M.has_value()}};
    S["order"] = j;
    return j;
  });

  if (ok && cfg.verify_samples > 0) {
    stage(stages, "verify", [&] {
      NearHomReport r = verify_near_homogeneity(*model, *data, cert.M, cert.p, cert.q, cfg.verify_samples,
                                                cfg.verify_radius, cfg.seed, cfg.threads);
      json j{{"samples", r.samples}, {"max_a1", r.max_a1}, {"max_a2", r.max_a2}, {"max_a3", r.max_a3},
             {"violations", r.violations}};
      inv.add("near_homogeneity_sampled", "residual <= 1e-9 (1 + bound)", r.ok(), j);
      return j;
    });
  }

  Trajectory& tr = res.trajectory;
  std::optional<ToyRun> toy;
  bool ran = ok && stage(stages, "dynamics", [&] {
    if (cfg.mode == RunMode::kReducedODE) {
      toy = run_reduced_ode(cfg.toy, *data);
      tr = toy->traj;
    } else {
      Vec th0 = initial_theta(cfg, model->dim());
      tr = cfg.mode == RunMode::kGD ? run_gd(*model, *data, th0, cert, cfg.dynamics)
                                    : run_gf(*model, *data, th0, cert, cfg.dynamics);
    }
    return json{{"records", tr.records.size()}, {"mode", cfg.mode == RunMode::kGD ? "GD"
                                                        : cfg.mode == RunMode::kGF ? "GF"
                                                                                   : "reduced_ode"}};
  });

  if (ran) {
    const RunChecks& c = tr.checks;
    S["checks"] = checks_json(c);
    const bool sep = c.sep_time.has_value();
    S["separability"] = {{"reached", sep}, {"time", sep ? json(*c.sep_time) : json(nullptr)}, {"step", c.sep_step}};
    if (!sep) S["separability"]["note"] = "separability never reached";
    const auto& last = tr.records.back();
    S["final"] = {{"t", last.t}, {"log_loss", last.log_loss}, {"rho", last.rho}};
    if (last.gamma) S["final"]["gamma"] = *last.gamma;
    if (last.gamma_tilde) S["final"]["gamma_tilde"] = *last.gamma_tilde;
    if (last.gamma_hat) {
      S["final"]["gamma_hat"] = *last.gamma_hat;
    } else if (last.rho > 0.0) {
      // GF runs do not track the GD margin; report it at the final state for comparison.
      double g = gd_margin(loss(*model, last.theta, *data), data->n(), last.rho, cert.pa_gd(), cert.M);
      if (std::isfinite(g)) S["final"]["gamma_hat"] = g;
    }
    if (last.eps_t) S["final"]["eps_t"] = *last.eps_t;

    if (sep) {
      inv.add("separability_persistence", "zero violations", c.sep_violations == 0, {{"violations", c.sep_violations}});
      inv.add(cfg.mode == RunMode::kGD ? "gd_margin_monotone" : "gf_margin_monotone",
              "drop <= " + fmt(cfg.dynamics.monotonicity_tol) + " per step", c.margin_violations == 0,
              {{"violations", c.margin_violations}, {"worst_drop", c.worst_margin_drop}});
      inv.add("norm_increasing", "strict", c.rho_violations == 0, {{"violations", c.rho_violations}});
      inv.add("radial_speed_bracket", "1e-9 relative", c.speed_violations == 0, {{"violations", c.speed_violations}});
      inv.add("margin_sandwich", "1e-12 relative", c.sandwich_violations == 0, {{"violations", c.sandwich_violations}});
      if (cfg.mode == RunMode::kGD)
        inv.add("gd_loss_monotone", "no increase", c.loss_violations == 0, {{"violations", c.loss_violations}});
      if (c.eps_at_sep && c.eps_final)
        inv.add("eps_decreasing", "eps_final < eps_at_sep", *c.eps_final < *c.eps_at_sep,
                {{"eps_at_sep", *c.eps_at_sep}, {"eps_final", *c.eps_final}});
      double zeta_total = last.zeta, zeta_head = 0.0;
      for (const auto& r : tr.records)
        if (r.t <= last.t / 10.0) zeta_head = r.zeta;
      S["arc_length"] = {{"total", zeta_total}, {"final_decade", zeta_total - zeta_head}};
      if (cfg.fit_rates && zeta_total > 0.0)
        inv.add("arc_length_final_decade", "<= 10% of total", zeta_total - zeta_head <= 0.1 * zeta_total,
                {{"total", zeta_total}, {"final_decade", zeta_total - zeta_head}});
    }

    // Log-domain margins against a naive evaluation wherever L is representable.
    double worst = 0.0;
    int compared = 0;
    for (const auto& r : tr.records) {
      if (r.rho <= 0.0) continue;
      LossEval e = loss(*model, r.theta, *data);
      double pa = cfg.mode == RunMode::kGD ? cert.pa_gd()(r.rho) : cert.pa_gf()(r.rho);
      if (auto d = naive_margin_disagreement(e, data->n(), r.rho, cert.M, pa)) {
        worst = std::max(worst, *d);
        ++compared;
      }
    }
    inv.add("log_vs_naive_margins", "1e-9 relative", worst <= 1e-9, {{"worst", worst}, {"records", compared}});

    if (toy) {
      S["toy"] = {{"max_abs_balancing", toy->max_abs_balancing},
                  {"balancing_violations", toy->balancing_violations},
                  {"min_a", toy->min_a},
                  {"t0", toy_t0(cfg.toy.gamma_star)},
                  {"w_norm_t0", toy->w_norm_t0},
                  {"steps", toy->steps}};
      inv.add("balancing_conservation", "1e3 rk_tolerance, absolute", toy->balancing_violations == 0,
              {{"max_abs", toy->max_abs_balancing}});
      inv.add("a_nonnegative", "exact", toy->min_a >= 0.0, {{"min_a", toy->min_a}});
      inv.add("toy_loss_bound", "on t >= 1", toy->loss_bound_violations == 0, {{"violations", toy->loss_bound_violations}});
      inv.add("toy_norm_lower_bound", "on t >= t0", toy->norm_lower_violations == 0,
              {{"violations", toy->norm_lower_violations}});
      inv.add("toy_norm_upper_bound", "on t >= t0", toy->norm_upper_violations == 0,
              {{"violations", toy->norm_upper_violations}});
      bool inc = true;
      double prev = -std::numeric_limits<double>::infinity();
      for (const auto& r : tr.records) {
        if (r.t < last.t / 10.0 || r.rho <= 0.0) continue;
        double q = -r.log_loss / r.rho;
        inc = inc && q > prev;
        prev = q;
      }
      inv.add("loss_to_norm_ratio_increasing", "strict over the last decade", inc);
    }

    if (cfg.expect_separable)
      inv.add("expected_separability", *cfg.expect_separable ? "reached" : "never reached",
              sep == *cfg.expect_separable);
    if (cfg.expect_log_loss_floor)
      inv.add("log_loss_floor", "min log_loss >= floor - " + fmt(cfg.expect_floor_tol),
              c.min_log_loss >= *cfg.expect_log_loss_floor - cfg.expect_floor_tol,
              {{"min_log_loss", c.min_log_loss}, {"floor", *cfg.expect_log_loss_floor}});
    if (cfg.expect_theta_max)
      inv.add("theta_upper", "every coordinate <= bound", c.max_theta_coeff <= *cfg.expect_theta_max,
              {{"max_theta_coeff", c.max_theta_coeff}});
  }

  if (ok && cfg.homogenization_samples > 0) {
    stage(stages, "homogenization", [&] {
      std::vector<Vec> thetas;
      std::mt19937_64 rng(item_seed(cfg.seed, 0x4d));
      while (static_cast<int>(thetas.size()) < cfg.homogenization_samples) {
        Vec th = sample_in_ball(rng, model->dim(), cfg.homogenization_radius);
        if (th.norm() > 0.0) thetas.push_back(std::move(th));
      }
      ErrorBoundReport r = check_error_bound(*model, thetas, *data, cert.M, cert.pa_gf(), {}, cfg.threads);
      json j{{"samples", thetas.size()},
             {"max_residual", r.max_residual},
             {"max_certified_residual", r.max_certified_residual},
             {"unconverged", r.unconverged}};
      inv.add("homogenization_bound", "|f - f_M| <= p_a + estimator tolerance", r.ok(), j);
      if (ran && tr.checks.sep_time) {
        for (const auto& rec : tr.records) {
          if (!rec.sep) continue;
          LeadingComponentReport lc = leading_component_positive(*model, rec.theta, *data, cert.M, cert.pa_gf());
          j["leading_component_min"] = lc.min_value;
          j["leading_component_t"] = rec.t;
          inv.add("leading_component_positive", "> 0 at the first separable record", lc.positive(),
                  {{"min", lc.min_value}, {"t", rec.t}});
          break;
        }
      }
      return j;
    });
  }

  if (ran && cfg.kkt && tr.checks.sep_time && tr.checks.margin_at_sep && *tr.checks.margin_at_sep > 0.0) {
    stage(stages, "kkt", [&] {
      const double B = std::pow(*tr.checks.margin_at_sep, -1.0 / cert.M);
      long stat_bad = 0, comp_bad = 0, feas_bad = 0, b_bad = 0, evaluated = 0, errors = 0;
      double worst_stat = -std::numeric_limits<double>::infinity();
      std::optional<double> delta_first, delta_last, t_first;
      for (auto& rec : tr.records) {
        if (!rec.sep) continue;
        try {
          KktReport k = kkt_residuals(*model, rec.theta, *data, cert.M, cert.pa_gf(), B);
          rec.beta = k.beta;
          rec.kkt_eps = k.eps;
          rec.kkt_delta = k.delta;
          ++evaluated;
          worst_stat = std::max(worst_stat, k.stationarity - k.eps);
          if (k.stationarity > k.eps + 1e-6) ++stat_bad;
          if (k.complementarity > k.delta + 1e-6) ++comp_bad;
          if (k.feasibility < 1.0 - 1e-6) ++feas_bad;
          if (k.B_t > B * (1.0 + 1e-9)) ++b_bad;
          if (!delta_first) {
            delta_first = k.delta;
            t_first = rec.t;
          }
          delta_last = k.delta;
        } catch (const Error&) {
          ++errors;
        }
      }
      json j{{"B_const", B}, {"records", evaluated}, {"errors", errors}, {"worst_stationarity_minus_eps", worst_stat}};
      inv.add("kkt_stationarity", "measured <= eps + 1e-6", stat_bad == 0 && errors == 0, {{"violations", stat_bad}});
      inv.add("kkt_complementarity", "measured <= delta + 1e-6", comp_bad == 0 && errors == 0, {{"violations", comp_bad}});
      inv.add("kkt_feasibility", "min fbar_M(theta_hat) >= 1 - 1e-6", feas_bad == 0 && errors == 0,
              {{"violations", feas_bad}});
      inv.add("kkt_B_bound", "B_const >= rho / fM_min^{1/M}", b_bad == 0, {{"violations", b_bad}});
      if (delta_first && delta_last && evaluated >= 2) {
        j["delta_first"] = *delta_first;
        j["delta_final"] = *delta_last;
        inv.add("kkt_delta_decreasing", "final < first separable record", *delta_last < *delta_first,
                {{"first", *delta_first}, {"final", *delta_last}});
        double t_end = tr.records.back().t;
        auto early = window_max_beta(tr.records, *t_first, 10.0 * *t_first);
        auto late = window_max_beta(tr.records, t_end / 10.0, t_end);
        if (early && late && t_end >= 100.0 * *t_first) {
          j["beta_window_first"] = *early;
          j["beta_window_final"] = *late;
          inv.add("kkt_beta_window", "final-decade max >= first-decade max", *late >= *early,
                  {{"first", *early}, {"final", *late}});
        }
      }
      return j;
    });
  }

  if (ran && cfg.fit_rates) {
    stage(stages, "rates", [&] {
      std::optional<double> start;
      if (cfg.fit_from_decade > 0.0) start = tr.records.back().t / std::pow(10.0, cfg.fit_from_decade);
      RateFit f = fit_rates(tr.records, cert.M, start, tr.checks.sep_time);
      json j = f;
      S["rates"] = j;
      inv.add("rate_loss_slope", "slope in [-1.2, -0.8], r^2 >= 0.98",
              f.loss_slope >= -1.2 && f.loss_slope <= -0.8 && f.r_squared >= 0.98, j);
      inv.add("rate_norm_band", "max/min of rho^M / log t <= 3", f.norm_ratio() <= 3.0, j);
      return j;
    });
  }

  // Outputs are written even when a later stage failed.
  if (ran) {
    stage(stages, "output", [&] {
      std::filesystem::create_directories(cfg.out_dir);
      std::string csv = (std::filesystem::path(cfg.out_dir) / cfg.trajectory_file).string();
      write_trajectory_csv(tr, csv);
      return json{{"trajectory", csv}};
    });
  }

  bool stage_errors = false;
  for (const auto& [k, v] : stages.items()) stage_errors = stage_errors || v.at("status") == "error";
  inv.add("pipeline_stages", "no stage errors", !stage_errors);
  S["stages"] = stages;
  S["invariants"] = inv.items;
  res.passed = inv.all;
  S["passed"] = res.passed;
  try {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(std::filesystem::path(cfg.out_dir) / cfg.summary_file);
    out << S.dump(2) << '\n';
  } catch (const std::exception&) {
    // The summary is also returned to the caller.
  }
  return res;
}

std::vector<ExperimentResult> run_experiments(const std::vector<ExperimentConfig>& cfgs, int threads) {
  std::vector<ExperimentResult> out(cfgs.size());
  parallel_for(static_cast<int>(cfgs.size()), threads, [&](int i) { out[i] = run_experiment(cfgs[i]); });
  return out;
}

bool emit_report(const json& summary, std::string& text) {
  std::ostringstream os;
  os << "experiment: " << summary.value("name", "?") << "  seed: " << summary.value("seed", 0) << '\n';
  if (summary.contains("separability")) {
    const json& s = summary.at("separability");
    if (s.value("reached", false)) os << "separability at t = " << s.at("time").get<double>() << '\n';
    else os << "separability never reached\n";
  }
  bool all = true;
  std::string first_fail;
  if (summary.contains("invariants")) {
    for (const auto& it : summary.at("invariants")) {
      bool p = it.value("passed", false);
      all = all && p;
      os << (p ? "PASS  " : "FAIL  ") << it.value("check", "?") << "  [" << it.value("tolerance", "") << "]";
      if (it.contains("detail") && !it.at("detail").empty()) os << "  " << it.at("detail").dump();
      os << '\n';
      if (!p && first_fail.empty()) first_fail = it.value("check", "?");
    }
  } else {
    all = false;
  }
  if (!all) {
    os << "first failing check: " << first_fail;
    if (summary.contains("checks")) {
      std::string fv = summary.at("checks").value("first_violation", "");
      if (!fv.empty()) os << " (first violating record: " << fv << ")";
    }
    os << '\n';
  }
  os << (all ? "RESULT: PASS" : "RESULT: FAIL") << '\n';
  text = os.str();
  return all;
}

}  // namespace nh
