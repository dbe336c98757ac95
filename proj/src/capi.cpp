#include "nearhom/nearhom.h"

#include <cstdlib>
#include <cstring>
#include <optional>
#include <random>
#include <string>

#include "nearhom/errors.hpp"
#include "nearhom/experiment.hpp"
#include "nearhom/kkt.hpp"
#include "nearhom/parallel.hpp"
#include "nearhom/verify.hpp"

struct nh_config {
  nh::ExperimentConfig cfg;
};
struct nh_model {
  nh::NetworkModel model;
};
struct nh_result {
  nh::ExperimentResult res;
};

namespace {

thread_local std::string g_last_error;

nh_status to_status(nh::ErrorCode c) {
  switch (c) {
    case nh::ErrorCode::kInvalidArgument: return NH_ERR_INVALID_ARGUMENT;
    case nh::ErrorCode::kDimensionMismatch: return NH_ERR_DIMENSION;
    case nh::ErrorCode::kDomain: return NH_ERR_DOMAIN;
    case nh::ErrorCode::kNumerical: return NH_ERR_NUMERICAL;
    case nh::ErrorCode::kIo: return NH_ERR_IO;
  }
  return NH_ERR_INTERNAL;
}

template <class F>
nh_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return NH_OK;
  } catch (const nh::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return NH_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NH_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return NH_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  nh::require(p != nullptr, nh::ErrorCode::kInvalidArgument, std::string("null ") + what);
}

struct Setup {
  nh::Dataset data;
  std::optional<nh::NetworkModel> model;
  nh::Certificate cert;
};

Setup setup(const nh::ExperimentConfig& c) {
  Setup s;
  s.data = nh::build_dataset(c);
  s.model = nh::build_model(c);
  s.cert = nh::build_certificate(c, *s.model, s.data);
  return s;
}

nh::Vec theta_vec(const Setup& s, const double* theta, size_t len) {
  nh::require(theta != nullptr && static_cast<int>(len) == s.model->dim(), nh::ErrorCode::kDimensionMismatch,
              "theta has " + std::to_string(len) + " entries, model needs " + std::to_string(s.model->dim()));
  return Eigen::Map<const nh::Vec>(theta, static_cast<Eigen::Index>(len));
}

}  // namespace

extern "C" {

const char* nh_version(void) { return "0.1.0"; }
const char* nh_last_error(void) { return g_last_error.c_str(); }
void nh_string_free(char* s) { std::free(s); }

nh_status nh_config_load(const char* path, nh_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "output");
    *out = new nh_config{nh::load_config(path)};
  });
}

nh_status nh_config_from_json(const char* json, nh_config** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "output");
    *out = new nh_config{nh::parse_config(nlohmann::json::parse(json))};
  });
}

nh_status nh_config_set_seed(nh_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.seed = seed;
    cfg->cfg.toy.seed = seed;
    cfg->cfg.source["seed"] = seed;
  });
}

nh_status nh_config_set_out_dir(nh_config* cfg, const char* dir) {
  return guarded([&] {
    need(cfg, "config");
    need(dir, "dir");
    cfg->cfg.out_dir = dir;
  });
}

nh_status nh_config_set_threads(nh_config* cfg, int threads) {
  return guarded([&] {
    need(cfg, "config");
    nh::require(threads >= 1, nh::ErrorCode::kInvalidArgument, "threads must be >= 1");
    cfg->cfg.threads = threads;
  });
}

void nh_config_free(nh_config* cfg) { delete cfg; }

nh_status nh_orders(const nh_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    need(out_json, "output");
    Setup s = setup(cfg->cfg);
    nlohmann::json j{{"M", s.cert.M},
                     {"p", s.cert.p},
                     {"q", s.cert.q},
                     {"pa_gf", s.cert.pa_gf()},
                     {"composed", s.model->order()},
                     {"x_max", s.data.max_norm()}};
    *out_json = dup(j.dump(2));
  });
}

nh_status nh_orders_from_spec(const char* spec_json, char** out_json) {
  return guarded([&] {
    need(spec_json, "spec");
    need(out_json, "output");
    nh::OrderDescriptor d = nh::orders_from_json(nlohmann::json::parse(spec_json));
    nlohmann::json j = d;
    j["M"] = d.m_param;
    *out_json = dup(j.dump(2));
  });
}

nh_status nh_verify(const nh_config* cfg, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    need(out_json, "output");
    const auto& c = cfg->cfg;
    Setup s = setup(c);
    nh::NearHomReport r = nh::verify_near_homogeneity(*s.model, s.data, s.cert.M, s.cert.p, s.cert.q,
                                                      std::max(1, c.verify_samples), c.verify_radius, c.seed,
                                                      c.threads);
    nlohmann::json j{{"M", s.cert.M},          {"samples", r.samples},       {"evaluations", r.evaluations},
                     {"max_a1", r.max_a1},     {"max_a2", r.max_a2},         {"max_a3", r.max_a3},
                     {"violations", r.violations}, {"passed", r.ok()}};
    *out_json = dup(j.dump(2));
  });
}

nh_status nh_homogenize(const nh_config* cfg, const double* theta, size_t len, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    need(out_json, "output");
    const auto& c = cfg->cfg;
    Setup s = setup(c);
    const nh::NonnegPoly pa = s.cert.pa_gf();
    nlohmann::json j{{"M", s.cert.M}};
    if (len > 0) {
      nh::Vec th = theta_vec(s, theta, len);
      nlohmann::json pts = nlohmann::json::array();
      for (int i = 0; i < s.data.n(); ++i) {
        nh::Vec x = s.data.X.row(i).transpose();
        nh::HomogenizationEstimate e = nh::estimate_fM(*s.model, th, x, s.cert.M, pa);
        double f = s.model->forward(th, x);
        pts.push_back({{"index", i},
                       {"f", f},
                       {"fM", e.value},
                       {"gap", std::abs(f - e.value)},
                       {"pa", pa(th.norm())},
                       {"certified_tolerance", e.certified_tolerance},
                       {"converged", e.converged}});
      }
      j["points"] = pts;
    }
    std::vector<nh::Vec> thetas;
    std::mt19937_64 rng(nh::item_seed(c.seed, 0x4d));
    const int want = std::max(1, c.homogenization_samples);
    while (static_cast<int>(thetas.size()) < want) {
      nh::Vec t = nh::sample_in_ball(rng, s.model->dim(), c.homogenization_radius);
      if (t.norm() > 0.0) thetas.push_back(std::move(t));
    }
    nh::ErrorBoundReport r = nh::check_error_bound(*s.model, thetas, s.data, s.cert.M, pa, {}, c.threads);
    j["error_bound"] = {{"samples", thetas.size()},
                        {"max_residual", r.max_residual},
                        {"max_certified_residual", r.max_certified_residual},
                        {"max_abs_residual", r.max_abs_residual},
                        {"unconverged", r.unconverged},
                        {"passed", r.ok()}};
    j["passed"] = r.ok();
    *out_json = dup(j.dump(2));
  });
}

nh_status nh_kkt(const nh_config* cfg, const double* theta, size_t len, double b_const, char** out_json) {
  return guarded([&] {
    need(cfg, "config");
    need(out_json, "output");
    Setup s = setup(cfg->cfg);
    nh::Vec th = theta_vec(s, theta, len);
    nh::KktReport k = nh::kkt_residuals(*s.model, th, s.data, s.cert.M, s.cert.pa_gf(), b_const);
    nlohmann::json j = k;
    j["passed"] = k.stationarity <= k.eps + 1e-6 && k.feasibility >= 1.0 - 1e-6;
    *out_json = dup(j.dump(2));
  });
}

nh_status nh_run(const nh_config* cfg, nh_result** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "output");
    *out = new nh_result{nh::run_experiment(cfg->cfg)};
  });
}

nh_status nh_result_summary(const nh_result* res, char** out_json) {
  return guarded([&] {
    need(res, "result");
    need(out_json, "output");
    *out_json = dup(res->res.summary.dump(2));
  });
}

nh_status nh_result_trajectory_csv(const nh_result* res, char** out_csv) {
  return guarded([&] {
    need(res, "result");
    need(out_csv, "output");
    *out_csv = dup(nh::trajectory_csv(res->res.trajectory));
  });
}

int nh_result_passed(const nh_result* res) { return res && res->res.passed ? 1 : 0; }
void nh_result_free(nh_result* res) { delete res; }

nh_status nh_rates_csv(const char* csv_path, int M, double window_start, char** out_json) {
  return guarded([&] {
    need(csv_path, "path");
    need(out_json, "output");
    std::optional<double> start;
    if (window_start > 0.0) start = window_start;
    nh::RateFit f = nh::fit_rates_csv(csv_path, M, start);
    nlohmann::json j = f;
    j["passed"] = f.loss_slope >= -1.2 && f.loss_slope <= -0.8 && f.r_squared >= 0.98 && f.norm_ratio() <= 3.0;
    *out_json = dup(j.dump(2));
  });
}

nh_status nh_report(const char* summary_json, char** out_text, int* passed) {
  return guarded([&] {
    need(summary_json, "summary");
    need(out_text, "output");
    std::string text;
    bool ok = nh::emit_report(nlohmann::json::parse(summary_json), text);
    if (passed) *passed = ok ? 1 : 0;
    *out_text = dup(text);
  });
}

nh_status nh_model_from_json(const char* json, nh_model** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "output");
    *out = new nh_model{nh::network_from_json(nlohmann::json::parse(json))};
  });
}

int nh_model_param_dim(const nh_model* m) { return m ? m->model.dim() : -1; }
int nh_model_input_dim(const nh_model* m) { return m ? m->model.input_dim() : -1; }

nh_status nh_model_forward(const nh_model* m, const double* theta, const double* x, double* out) {
  return guarded([&] {
    need(m, "model");
    need(theta, "theta");
    need(x, "x");
    need(out, "output");
    nh::Vec th = Eigen::Map<const nh::Vec>(theta, m->model.dim());
    nh::Vec xv = Eigen::Map<const nh::Vec>(x, m->model.input_dim());
    *out = m->model.forward(th, xv);
  });
}

nh_status nh_model_grad(const nh_model* m, const double* theta, const double* x, double* grad, double* value) {
  return guarded([&] {
    need(m, "model");
    need(theta, "theta");
    need(x, "x");
    need(grad, "grad");
    nh::Vec th = Eigen::Map<const nh::Vec>(theta, m->model.dim());
    nh::Vec xv = Eigen::Map<const nh::Vec>(x, m->model.input_dim());
    nh::Vec g;
    double f = m->model.grad_params(th, xv, g);
    Eigen::Map<nh::Vec>(grad, m->model.dim()) = g;
    if (value) *value = f;
  });
}

void nh_model_free(nh_model* m) { delete m; }

}  // extern "C"
