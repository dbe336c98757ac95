// Command-line front end. Talks to the library through the C interface only.
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nearhom/nearhom.h"

namespace {

using nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_dir;
  int threads = 1;
};

// Owned C string from the library.
struct CStr {
  char* p = nullptr;
  ~CStr() { nh_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

int report_error(nh_status st) {
  std::cerr << "error: " << nh_last_error() << '\n';
  // Bad input of any kind is a usage error; failures inside a computation are violations.
  return st == NH_ERR_NUMERICAL || st == NH_ERR_DOMAIN || st == NH_ERR_INTERNAL ? kExitViolation : kExitUsage;
}

struct Config {
  nh_config* h = nullptr;
  ~Config() { nh_config_free(h); }
};

nh_status open_config(const std::string& path, const Globals& g, Config& c) {
  if (path.empty()) {
    std::cerr << "error: --config is required\n";
    return NH_ERR_INVALID_ARGUMENT;
  }
  nh_status st = nh_config_load(path.c_str(), &c.h);
  if (st != NH_OK) return st;
  if (g.seed_set && (st = nh_config_set_seed(c.h, g.seed)) != NH_OK) return st;
  if (!g.out_dir.empty() && (st = nh_config_set_out_dir(c.h, g.out_dir.c_str())) != NH_OK) return st;
  return nh_config_set_threads(c.h, g.threads);
}

std::vector<double> parse_theta(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.find_first_not_of(" \t") == std::string::npos) continue;
    v.push_back(std::stod(cell));
  }
  return v;
}

int verdict(const std::string& out_json) {
  std::cout << out_json << '\n';
  json j = json::parse(out_json);
  return j.value("passed", true) ? kExitPass : kExitViolation;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_configs(const std::vector<std::string>& paths, const Globals& g, bool quiet) {
  const std::size_t k = paths.size();
  std::vector<std::string> summaries(k), errors(k);
  std::vector<int> codes(k, kExitPass);
  auto one = [&](std::size_t i) {
    Config c;
    Globals gi = g;
    if (k > 1 && !g.out_dir.empty()) {
      std::string stem = paths[i].substr(paths[i].find_last_of('/') + 1);
      gi.out_dir = g.out_dir + "/" + stem.substr(0, stem.find_last_of('.'));
    }
    nh_status st = open_config(paths[i], gi, c);
    nh_result* r = nullptr;
    if (st == NH_OK) st = nh_run(c.h, &r);
    if (st != NH_OK) {
      errors[i] = nh_last_error();
      codes[i] = st == NH_ERR_NUMERICAL || st == NH_ERR_DOMAIN ? kExitViolation : kExitUsage;
      return;
    }
    CStr s;
    nh_result_summary(r, &s.p);
    summaries[i] = s.str();
    codes[i] = nh_result_passed(r) ? kExitPass : kExitViolation;
    nh_result_free(r);
  };
  // Configs run concurrently; output order follows the command line.
  std::vector<std::thread> pool;
  const std::size_t workers = std::min<std::size_t>(k, static_cast<std::size_t>(std::max(1, g.threads)));
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < k; i += workers) one(i);
    });
  for (auto& t : pool) t.join();

  int worst = kExitPass;
  for (std::size_t i = 0; i < k; ++i) {
    if (!errors[i].empty()) {
      std::cerr << paths[i] << ": error: " << errors[i] << '\n';
    } else {
      CStr text;
      int passed = 0;
      nh_report(summaries[i].c_str(), &text.p, &passed);
      if (!quiet || !passed) std::cout << text.str();
    }
    worst = std::max(worst, codes[i]);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-homogeneous network dynamics: order certificates, margin tracking and KKT diagnostics"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Experiment config (.yaml, .yml or .json)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out-dir", g.out_dir, "Directory for trajectory and summary files");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  int code = kExitPass;

  auto* orders = app.add_subcommand("orders", "Composed order M and envelopes p, q");
  std::string spec_path;
  orders->add_option("--spec", spec_path, "Bare JSON block list instead of a config");
  orders->fallthrough();

  auto* verify = app.add_subcommand("verify", "Sampled near-homogeneity check");
  verify->fallthrough();

  auto* homog = app.add_subcommand("homogenize", "Estimate f_M and check the homogenization bound");
  std::string theta_s;
  homog->add_option("--theta", theta_s, "Comma-separated parameters for per-sample estimates");
  homog->fallthrough();

  auto* run = app.add_subcommand("run", "Full pipeline for one or more configs");
  std::vector<std::string> run_configs_list;
  bool quiet = false;
  run->add_option("configs", run_configs_list, "Additional configs run as a sweep");
  run->add_flag("--quiet", quiet, "Print only failing reports");
  run->fallthrough();

  auto* toy = app.add_subcommand("toy", "Reduced symmetric flow of the two-layer toy model");
  int toy_d = 2, toy_n = 8;
  double toy_gamma = 0.5, toy_alpha = 0.5, toy_horizon = 1e5;
  std::string toy_out;
  toy->add_option("--d", toy_d, "Input dimension")->check(CLI::PositiveNumber);
  toy->add_option("--n", toy_n, "Number of samples (even)")->check(CLI::PositiveNumber);
  toy->add_option("--gamma-star", toy_gamma, "Margin of the generated data");
  toy->add_option("--alpha-l", toy_alpha, "Leaky slope");
  toy->add_option("--horizon", toy_horizon, "Terminal time");
  toy->add_option("--out", toy_out, "Output directory");
  toy->fallthrough();

  auto* rates = app.add_subcommand("rates", "Fit loss and norm rates to a trajectory CSV");
  std::string traj_path;
  int rates_M = 0;
  double window_start = 0.0;
  rates->add_option("--trajectory", traj_path, "Trajectory CSV")->required();
  rates->add_option("--M", rates_M, "Order")->required()->check(CLI::PositiveNumber);
  rates->add_option("--window-start", window_start, "Start of the fit window (default: last decade)");
  rates->fallthrough();

  auto* kkt = app.add_subcommand("kkt", "KKT certificate at a parameter vector");
  std::string kkt_theta;
  double kkt_B = 0.0;
  kkt->add_option("--theta", kkt_theta, "Comma-separated parameters")->required();
  kkt->add_option("--B", kkt_B, "Norm constant; default rho / fM_min^{1/M}");
  kkt->fallthrough();

  auto* report = app.add_subcommand("report", "Pass/fail listing from summary files");
  std::vector<std::string> summaries;
  report->add_option("summaries", summaries, "Summary JSON files")->required();
  report->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (*orders) {
      CStr out;
      nh_status st;
      if (!spec_path.empty()) {
        std::string text = read_file(spec_path);
        st = nh_orders_from_spec(text.c_str(), &out.p);
      } else {
        Config c;
        st = open_config(g.config, g, c);
        if (st == NH_OK) st = nh_orders(c.h, &out.p);
      }
      if (st != NH_OK) return report_error(st);
      std::cout << out.str() << '\n';
    } else if (*verify || *homog || *kkt) {
      Config c;
      nh_status st = open_config(g.config, g, c);
      if (st != NH_OK) return report_error(st);
      CStr out;
      if (*verify) {
        st = nh_verify(c.h, &out.p);
      } else if (*homog) {
        std::vector<double> th = parse_theta(theta_s);
        st = nh_homogenize(c.h, th.data(), th.size(), &out.p);
      } else {
        std::vector<double> th = parse_theta(kkt_theta);
        st = nh_kkt(c.h, th.data(), th.size(), kkt_B, &out.p);
      }
      if (st != NH_OK) return report_error(st);
      code = verdict(out.str());
    } else if (*run) {
      std::vector<std::string> all;
      if (!g.config.empty()) all.push_back(g.config);
      all.insert(all.end(), run_configs_list.begin(), run_configs_list.end());
      if (all.empty()) {
        std::cerr << "error: run needs --config or config paths\n";
        return kExitUsage;
      }
      code = run_configs(all, g, quiet);
    } else if (*toy) {
      json cfg{{"name", "toy"},
               {"seed", g.seed_set ? g.seed : 7},
               {"dataset", {{"source", "generator"}, {"d", toy_d}, {"n", toy_n}, {"gamma_star", toy_gamma}}},
               {"dynamics", {{"mode", "reduced"}, {"horizon", toy_horizon}, {"alpha_L", toy_alpha}}},
               {"checks", {{"rates", true}}},
               {"output", {{"dir", !toy_out.empty() ? toy_out : !g.out_dir.empty() ? g.out_dir : "."}}}};
      Config c;
      nh_status st = nh_config_from_json(cfg.dump().c_str(), &c.h);
      if (st == NH_OK) st = nh_config_set_threads(c.h, g.threads);
      nh_result* r = nullptr;
      if (st == NH_OK) st = nh_run(c.h, &r);
      if (st != NH_OK) return report_error(st);
      CStr s, text;
      nh_result_summary(r, &s.p);
      int passed = 0;
      nh_report(s.p, &text.p, &passed);
      std::cout << text.str();
      nh_result_free(r);
      code = passed ? kExitPass : kExitViolation;
    } else if (*rates) {
      CStr out;
      nh_status st = nh_rates_csv(traj_path.c_str(), rates_M, window_start, &out.p);
      if (st != NH_OK) return report_error(st);
      code = verdict(out.str());
    } else if (*report) {
      for (const auto& path : summaries) {
        std::string text_in = read_file(path);
        CStr text;
        int passed = 0;
        nh_status st = nh_report(text_in.c_str(), &text.p, &passed);
        if (st != NH_OK) return report_error(st);
        std::cout << text.str();
        if (!passed) code = kExitViolation;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return code;
}
