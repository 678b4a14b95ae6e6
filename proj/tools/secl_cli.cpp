// secl: Monte Carlo runner for the confidence-level event-triggered estimator.
//
//   secl simulate --case 1 --trials 5000 --steps 101 --seed 1 --out out/case1
//   secl table1 --trials 5000 --seed 1 --out out/table1
//   secl rates --case 3 --trial-index 40 --out out/rates3
//   secl check
//
// Settings may also come from a key=value file given with --config; command
// line flags win. SECL_OUTPUT_DIR sets the default output directory.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "secl/harness/config.hpp"
#include "secl/harness/experiment.hpp"
#include "secl/harness/self_check.hpp"
#include "secl/rate.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

int report_checks() {
  const auto results = secl::run_self_checks();
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    if (!r.passed) ++failed;
  }
  std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed == 0 ? 0 : kExitCheckFailed;
}

// Sanity conditions every summary must satisfy; returns false and prints why otherwise.
bool summary_invariants_hold(const secl::ExperimentSummary& s) {
  bool ok = true;
  auto fail = [&](const std::string& msg) {
    std::cerr << "invariant violated (" << s.label << "): " << msg << "\n";
    ok = false;
  };
  for (int k = 0; k < s.steps; ++k) {
    for (double r : {s.comm_rate_empirical[k], s.comm_rate_alg1[k], s.comm_rate_alg2[k]}) {
      if (!(r >= 0.0 && r <= 1.0)) fail("rate outside [0, 1] at k = " + std::to_string(k));
    }
  }
  if (!(s.rms.array() >= 0.0).all()) fail("negative rms");
  if (s.max_first_moment > 1e-7) fail("first moment over the silent region is not negligible");
  return ok;
}

void print_summary(const secl::ExperimentSummary& s) {
  std::cout << s.label << ": trials=" << s.trials << " steps=" << s.steps
            << " avg_empirical=" << secl::format_double(s.avg_empirical)
            << " avg_alg1=" << secl::format_double(s.avg_alg1)
            << " avg_alg2=" << secl::format_double(s.avg_alg2)
            << " mean_position_rms=" << secl::format_double(s.mean_position_rms) << "\n";
}

void add_run_options(CLI::App* cmd, secl::ExperimentConfig& cfg, std::string& case_text, std::string& nbar_text,
                     std::string& rate_mode_text) {
  cmd->add_option("--case", case_text, "Tolerable bound: 1, 2, 3 or custom");
  cmd->add_option("--nbar", nbar_text, "Custom bound as 'a,b;c,d' (implies --case custom)");
  cmd->add_option("--trials", cfg.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", cfg.steps, "Time steps per trial (k = 0 .. steps-1)")->check(CLI::Range(2, 1 << 30));
  cmd->add_option("--seed", cfg.seed, "Master seed");
  cmd->add_option("--alpha", cfg.alpha, "Upper-tail probability of the trigger threshold");
  cmd->add_option("--out", cfg.output_dir, "Output directory");
  cmd->add_option("--trial-index", cfg.rate_trial_index, "1-based trial that drives the rate predictors");
  cmd->add_option("--rate-mode", rate_mode_text, "single (designated trial) or averaged (all trials)");
  cmd->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--tol", cfg.quad_tol, "Quadrature tolerance");
  cmd->add_flag("--joseph,!--no-joseph", cfg.joseph_form, "Joseph-form covariance update on transmitted steps");
}

void finish_options(secl::ExperimentConfig& cfg, const std::string& case_text, const std::string& nbar_text,
                    const std::string& rate_mode_text) {
  if (!case_text.empty()) secl::set_case(cfg, case_text);
  if (!nbar_text.empty()) {
    cfg.custom_nbar = secl::parse_matrix(nbar_text);
    cfg.case_id = 0;
  }
  if (!rate_mode_text.empty()) cfg.rate_mode = secl::parse_rate_mode(rate_mode_text);
}

}  // namespace

int main(int argc, char** argv) {
  secl::ExperimentConfig cfg;
  try {
    if (const char* env = std::getenv("SECL_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    if (const std::string path = find_config_path(argc, argv); !path.empty()) secl::load_config_file(cfg, path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }

  CLI::App app{"Confidence-level event-triggered estimation experiments"};
  std::string config_path;
  bool check = false;
  app.add_option("--config", config_path, "key=value settings file (flags override it)");
  app.add_flag("--check", check, "Run the built-in oracle suite first");
  app.require_subcommand(0, 1);

  std::string case_text, nbar_text, rate_mode_text;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run the Monte Carlo experiment for one case");
  add_run_options(simulate_cmd, cfg, case_text, nbar_text, rate_mode_text);

  auto* table_cmd = app.add_subcommand("table1", "Average communication rates for all three cases");
  table_cmd->add_option("--trials", cfg.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
  table_cmd->add_option("--steps", cfg.steps, "Time steps per trial")->check(CLI::Range(2, 1 << 30));
  table_cmd->add_option("--seed", cfg.seed, "Master seed");
  table_cmd->add_option("--alpha", cfg.alpha, "Upper-tail probability of the trigger threshold");
  table_cmd->add_option("--out", cfg.output_dir, "Output directory");
  table_cmd->add_option("--trial-index", cfg.rate_trial_index, "1-based trial that drives the rate predictors");
  table_cmd->add_option("--rate-mode", rate_mode_text, "single or averaged");
  table_cmd->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
  table_cmd->add_option("--tol", cfg.quad_tol, "Quadrature tolerance");

  auto* rates_cmd = app.add_subcommand("rates", "Rate predictors along one designated trial");
  rates_cmd->add_option("--case", case_text, "Tolerable bound: 1, 2, 3 or custom");
  rates_cmd->add_option("--nbar", nbar_text, "Custom bound as 'a,b;c,d'");
  rates_cmd->add_option("--trial-index", cfg.rate_trial_index, "1-based trial number");
  rates_cmd->add_option("--steps", cfg.steps, "Time steps")->check(CLI::Range(2, 1 << 30));
  rates_cmd->add_option("--seed", cfg.seed, "Master seed");
  rates_cmd->add_option("--alpha", cfg.alpha, "Upper-tail probability of the trigger threshold");
  rates_cmd->add_option("--out", cfg.output_dir, "Output directory");
  rates_cmd->add_option("--tol", cfg.quad_tol, "Quadrature tolerance");

  auto* check_cmd = app.add_subcommand("check", "Run the built-in oracle suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    int status = 0;
    if (check || check_cmd->parsed()) {
      status = report_checks();
      if (status != 0 || check_cmd->parsed()) return status;
    }
    finish_options(cfg, case_text, nbar_text, rate_mode_text);

    if (simulate_cmd->parsed()) {
      const secl::ExperimentSummary s = secl::run_monte_carlo(cfg);
      secl::emit_csv(s, cfg.output_dir);
      print_summary(s);
      return summary_invariants_hold(s) ? 0 : kExitCheckFailed;
    }
    if (table_cmd->parsed()) {
      const secl::Table1Result t = secl::table1(cfg);
      bool ok = true;
      for (const auto& s : t.cases) {
        secl::emit_csv(s, std::filesystem::path(cfg.output_dir) / s.label);
        ok = summary_invariants_hold(s) && ok;
      }
      secl::write_summary_rows(t.cases, std::filesystem::path(cfg.output_dir) / "summary.csv");
      std::cout << secl::format_table1(t);
      return ok ? 0 : kExitCheckFailed;
    }
    if (rates_cmd->parsed()) {
      if (cfg.rate_trial_index < 1) throw std::invalid_argument("trial index must be >= 1");
      cfg.trials = std::max(cfg.trials, cfg.rate_trial_index);
      cfg.validate();
      const secl::LinearGaussianModel model = secl::tracking_preset();
      const secl::TriggerConfig trig = secl::experiment_trigger(cfg);
      secl::Rng rng(secl::derive_seed(cfg.seed, static_cast<std::uint64_t>(cfg.rate_trial_index - 1)));
      const secl::Trajectory traj = secl::simulate(model, cfg.steps - 1, rng, secl::tracking_true_initial_state());
      const secl::RateTrace trace =
          secl::rates_along(model, trig, traj.measurements, secl::EstimatorOptions{cfg.joseph_form, cfg.quad_tol});

      secl::ExperimentSummary s;
      s.label = secl::case_label(cfg);
      s.trials = 1;
      s.steps = cfg.steps;
      for (int k = 0; k < cfg.steps; ++k) {
        s.comm_rate_empirical.push_back(trace.gamma[k]);
        s.comm_rate_se.push_back(0.0);
      }
      s.comm_rate_alg1 = trace.alg1;
      s.comm_rate_alg2 = trace.alg2;
      auto mean = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc / static_cast<double>(v.size());
      };
      s.avg_empirical = mean(s.comm_rate_empirical);
      s.avg_alg1 = mean(s.comm_rate_alg1);
      s.avg_alg2 = mean(s.comm_rate_alg2);
      std::filesystem::create_directories(cfg.output_dir);
      secl::write_rates_csv(s, std::filesystem::path(cfg.output_dir) / "rates.csv");
      secl::write_summary_rows({s}, std::filesystem::path(cfg.output_dir) / "summary.csv");
      std::cout << s.label << " trial " << cfg.rate_trial_index << ": transmitted=" << secl::format_double(s.avg_empirical)
                << " avg_alg1=" << secl::format_double(s.avg_alg1) << " avg_alg2=" << secl::format_double(s.avg_alg2)
                << "\n";
      return 0;
    }
    if (!check) {
      std::cout << app.help();
      return kExitError;
    }
    return status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
