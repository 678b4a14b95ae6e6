#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "secl/estimator.hpp"
#include "secl/model.hpp"
#include "secl/rate.hpp"
#include "secl/trigger.hpp"

namespace secl {

enum class RateMode { single_trial, averaged };

struct ExperimentConfig {
  int case_id = 1;                    // 1, 2, 3, or 0 for custom_nbar
  std::optional<Matrix> custom_nbar;  // used when case_id == 0
  int trials = 5000;
  int steps = 101;  // k = 0 .. steps-1
  std::uint64_t seed = 20240101;
  double alpha = kDefaultAlpha;
  int rate_trial_index = 40;  // 1-based trial that drives the rate predictors
  RateMode rate_mode = RateMode::single_trial;
  std::string output_dir = ".";
  bool joseph_form = true;
  double quad_tol = kDefaultBallTolerance;
  int threads = 0;  // 0: hardware concurrency

  // Model override; defaults to the tracking preset with its known initial state.
  std::optional<LinearGaussianModel> model;
  std::optional<Vector> true_initial_state;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
    if (steps < 2) throw std::invalid_argument("ExperimentConfig: steps must be >= 2");
    if (case_id < 0 || case_id > 3) throw std::invalid_argument("ExperimentConfig: case must be 1, 2, 3 or custom");
    if (case_id == 0 && !custom_nbar) throw std::invalid_argument("ExperimentConfig: custom case needs nbar");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ExperimentConfig: alpha must lie in (0, 1)");
    if (rate_trial_index < 1 || rate_trial_index > trials) {
      throw std::invalid_argument("ExperimentConfig: trial index must lie in [1, trials]");
    }
    if (!(quad_tol > 0.0)) throw std::invalid_argument("ExperimentConfig: tol must be > 0");
  }
};

/// Tolerable innovation-covariance bound of the three reference cases.
inline Matrix case_nbar(int case_id) {
  Matrix base(2, 2);
  switch (case_id) {
    case 1:
      base << 50, 4, 4, 8;
      return base;
    case 2:
      base << 50, 4, 4, 8;
      return 0.5 * base;
    case 3:
      base << 60, 10, 10, 20;
      return base;
    default:
      throw std::invalid_argument("case_nbar: unknown case " + std::to_string(case_id));
  }
}

inline std::string case_label(const ExperimentConfig& cfg) {
  return cfg.case_id == 0 ? std::string("custom") : "case" + std::to_string(cfg.case_id);
}

struct ExperimentSummary {
  std::string label;
  int trials = 0;
  int steps = 0;
  Matrix rms;                           // steps x n, per state component
  std::vector<double> comm_rate_empirical;
  std::vector<double> comm_rate_se;     // binomial standard error of the empirical rate
  std::vector<double> comm_rate_alg1;
  std::vector<double> comm_rate_alg2;
  double avg_empirical = 0.0;
  double avg_alg1 = 0.0;
  double avg_alg2 = 0.0;
  double mean_position_rms = 0.0;       // time average of rms(:, 0)
  std::vector<double> mean_trace_P;     // trial average of trace(P_k)
  std::vector<double> mse_trace;        // trial average of |x_k - xhat_k|^2
  double max_first_moment = 0.0;        // max |psi|_inf over every step of every trial
  double max_first_moment_diag = 0.0;   // max |K psi / h|_inf
};

namespace detail {

struct TrialRecord {
  std::vector<std::uint8_t> gamma;
  Matrix sq_err;  // steps x n
  std::vector<double> trace_P;
  double max_m1 = 0.0;
  double max_e = 0.0;
  std::vector<double> alg1;
  std::vector<double> alg2;
};

inline TrialRecord run_trial(const LinearGaussianModel& model, const TriggerConfig& trig, const EstimatorOptions& opts,
                             const Trajectory& traj, bool with_rates) {
  const auto steps = static_cast<int>(traj.measurements.size());
  TrialRecord rec;
  rec.gamma.resize(steps);
  rec.sq_err.resize(steps, model.n());
  rec.trace_P.resize(steps);

  auto record = [&](int k, const StepOutput& out, const EstimatorState& st) {
    rec.gamma[k] = out.gamma ? 1 : 0;
    rec.sq_err.row(k) = (traj.states[k] - out.xhat).cwiseAbs2().transpose();
    rec.trace_P[k] = out.P.trace();
    rec.max_m1 = std::max(rec.max_m1, st.cache.psi.cwiseAbs().maxCoeff());
    rec.max_e = std::max(rec.max_e, out.first_moment_diag.cwiseAbs().maxCoeff());
  };

  if (with_rates) {
    const BootstrapRates boot = bootstrap_rates(model, trig, opts);
    rec.alg1.reserve(steps);
    rec.alg2.reserve(steps);
    rec.alg1.push_back(boot.E_gamma0);
    rec.alg2.push_back(boot.E_gamma0);
    InitResult init = initialize(model, trig, traj.measurements[0], opts);
    record(0, init.output, init.state);
    EstimatorState& st = init.state;
    for (int k = 1; k < steps; ++k) {
      const RateState previous = RateState::from_cache(st.cache);
      const StepOutput out = step(st, model, trig, traj.measurements[k], opts);
      record(k, out, st);
      rec.alg1.push_back(rate_one_step(st.cache).gamma_hat);
      rec.alg2.push_back(k == 1 ? boot.E_gamma1 : rate_two_step(previous, model, trig, opts).gamma_hat);
    }
  } else {
    InitResult init = initialize(model, trig, traj.measurements[0], opts);
    record(0, init.output, init.state);
    for (int k = 1; k < steps; ++k) {
      const StepOutput out = step(init.state, model, trig, traj.measurements[k], opts);
      record(k, out, init.state);
    }
  }
  return rec;
}

// Runs body(i) for i in [0, count) on up to `threads` workers. The first
// exception (lowest index) is rethrown after all workers finish.
template <class Body>
void parallel_for(int count, int threads, Body&& body) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, count);
  std::vector<std::exception_ptr> errors(count);
  auto work = [&](int worker) {
    for (int i = worker; i < count; i += threads) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Trigger configuration an experiment runs with.
inline TriggerConfig experiment_trigger(const ExperimentConfig& cfg) {
  const Matrix nbar = cfg.case_id == 0 ? *cfg.custom_nbar : case_nbar(cfg.case_id);
  return make_config(SpdMatrix(nbar, "nbar"), cfg.alpha);
}

/// Simulates `trials` independent trajectories, runs the estimator on each and
/// aggregates RMS errors and transmission frequencies. Trial i draws from its
/// own generator seeded by derive_seed(seed, i), and aggregation runs in trial
/// order, so results do not depend on the thread count.
inline ExperimentSummary run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.validate();
  const LinearGaussianModel model = cfg.model ? *cfg.model : tracking_preset();
  model.validate();
  const std::optional<Vector> x0 =
      cfg.true_initial_state ? cfg.true_initial_state
                             : (cfg.model ? std::nullopt : std::optional<Vector>(tracking_true_initial_state()));
  const TriggerConfig trig = experiment_trigger(cfg);
  if (trig.p() != model.p()) throw std::invalid_argument("run_monte_carlo: nbar does not match the model");
  const EstimatorOptions opts{cfg.joseph_form, cfg.quad_tol};

  const int designated = cfg.rate_trial_index - 1;
  std::vector<detail::TrialRecord> records(cfg.trials);
  detail::parallel_for(cfg.trials, cfg.threads, [&](int i) {
    try {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
      const Trajectory traj = simulate(model, cfg.steps - 1, rng, x0);
      const bool with_rates = cfg.rate_mode == RateMode::averaged || i == designated;
      records[i] = detail::run_trial(model, trig, opts, traj, with_rates);
    } catch (const std::exception& e) {
      throw std::runtime_error("trial " + std::to_string(i + 1) + " failed: " + e.what());
    }
  });

  const int steps = cfg.steps;
  const auto n = model.n();
  const double N = cfg.trials;
  ExperimentSummary s;
  s.label = case_label(cfg);
  s.trials = cfg.trials;
  s.steps = steps;
  Matrix sq_sum = Matrix::Zero(steps, n);
  std::vector<double> hits(steps, 0.0);
  s.mean_trace_P.assign(steps, 0.0);
  s.mse_trace.assign(steps, 0.0);
  s.comm_rate_alg1.assign(steps, 0.0);
  s.comm_rate_alg2.assign(steps, 0.0);
  for (int i = 0; i < cfg.trials; ++i) {
    const auto& r = records[i];
    sq_sum += r.sq_err;
    for (int k = 0; k < steps; ++k) {
      hits[k] += r.gamma[k];
      s.mean_trace_P[k] += r.trace_P[k];
      s.mse_trace[k] += r.sq_err.row(k).sum();
    }
    s.max_first_moment = std::max(s.max_first_moment, r.max_m1);
    s.max_first_moment_diag = std::max(s.max_first_moment_diag, r.max_e);
    if (cfg.rate_mode == RateMode::averaged) {
      for (int k = 0; k < steps; ++k) {
        s.comm_rate_alg1[k] += r.alg1[k] / N;
        s.comm_rate_alg2[k] += r.alg2[k] / N;
      }
    }
  }
  if (cfg.rate_mode == RateMode::single_trial) {
    s.comm_rate_alg1 = records[designated].alg1;
    s.comm_rate_alg2 = records[designated].alg2;
  }
  s.rms = (sq_sum / N).cwiseSqrt();
  s.comm_rate_empirical.resize(steps);
  s.comm_rate_se.resize(steps);
  for (int k = 0; k < steps; ++k) {
    const double r = hits[k] / N;
    s.comm_rate_empirical[k] = r;
    s.comm_rate_se[k] = std::sqrt(r * (1.0 - r) / N);
    s.mean_trace_P[k] /= N;
    s.mse_trace[k] /= N;
  }
  auto mean = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  s.avg_empirical = mean(s.comm_rate_empirical);
  s.avg_alg1 = mean(s.comm_rate_alg1);
  s.avg_alg2 = mean(s.comm_rate_alg2);
  s.mean_position_rms = s.rms.col(0).mean();
  return s;
}

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

inline void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace detail

inline void write_summary_rows(const std::vector<ExperimentSummary>& summaries, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "case,avg_empirical,avg_alg1,avg_alg2\n";
  for (const auto& s : summaries) {
    out << s.label << ',' << format_double(s.avg_empirical) << ',' << format_double(s.avg_alg1) << ','
        << format_double(s.avg_alg2) << '\n';
  }
  detail::close_csv(out, path);
}

inline void write_rms_csv(const ExperimentSummary& s, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "k,rms_position,rms_velocity,rms_acceleration\n";
  for (int k = 0; k < s.steps; ++k) {
    out << k;
    for (Eigen::Index j = 0; j < 3; ++j) out << ',' << (j < s.rms.cols() ? format_double(s.rms(k, j)) : "");
    out << '\n';
  }
  detail::close_csv(out, path);
}

inline void write_rates_csv(const ExperimentSummary& s, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "k,empirical,alg1,alg2\n";
  for (int k = 0; k < s.steps; ++k) {
    out << k << ',' << format_double(s.comm_rate_empirical[k]) << ',' << format_double(s.comm_rate_alg1[k]) << ','
        << format_double(s.comm_rate_alg2[k]) << '\n';
  }
  detail::close_csv(out, path);
}

/// Writes rms.csv, rates.csv, rates_se.csv and summary.csv into output_dir,
/// creating it if needed.
inline void emit_csv(const ExperimentSummary& s, const std::filesystem::path& output_dir) {
  std::filesystem::create_directories(output_dir);
  write_rms_csv(s, output_dir / "rms.csv");
  write_rates_csv(s, output_dir / "rates.csv");

  const auto se_path = output_dir / "rates_se.csv";
  auto se = detail::open_csv(se_path);
  se << "k,empirical_se\n";
  for (int k = 0; k < s.steps; ++k) se << k << ',' << format_double(s.comm_rate_se[k]) << '\n';
  detail::close_csv(se, se_path);

  write_summary_rows({s}, output_dir / "summary.csv");
}

/// Reference average communication rates per case: SECL, one-step, two-step.
inline constexpr std::array<std::array<double, 3>, 3> kTable1Reference = {{
    {0.3812, 0.3730, 0.3761},
    {0.5684, 0.5696, 0.5678},
    {0.2798, 0.2750, 0.2712},
}};

/// Acceptance band on average rates for a given trial count.
inline double table1_band(int trials) {
  if (trials >= 5000) return 0.02;
  if (trials >= 1000) return 0.035;
  return 0.035 * std::sqrt(1000.0 / trials);
}

struct Table1Result {
  std::vector<ExperimentSummary> cases;
  int trials = 0;
};

inline Table1Result table1(const ExperimentConfig& base) {
  Table1Result out;
  out.trials = base.trials;
  for (int c = 1; c <= 3; ++c) {
    ExperimentConfig cfg = base;
    cfg.case_id = c;
    cfg.custom_nbar.reset();
    out.cases.push_back(run_monte_carlo(cfg));
  }
  return out;
}

inline std::string format_table1(const Table1Result& t) {
  auto fixed = [](double v, int prec = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return std::string(buf);
  };
  auto signed_delta = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.4f", v);
    return std::string(buf);
  };
  std::string s;
  s += "Average communication rates (" + std::to_string(t.trials) + " trials)\n";
  s += "case | SECL    (ref    delta)   | alg1    (ref    delta)   | alg2    (ref    delta)\n";
  for (std::size_t c = 0; c < t.cases.size(); ++c) {
    const auto& sm = t.cases[c];
    const std::array<double, 3> got = {sm.avg_empirical, sm.avg_alg1, sm.avg_alg2};
    s += "  " + std::to_string(c + 1) + "  ";
    for (int j = 0; j < 3; ++j) {
      const double ref = kTable1Reference[c][j];
      s += "| " + fixed(got[j]) + " (" + fixed(ref) + " " + signed_delta(got[j] - ref) + ") ";
    }
    s += "\n";
  }
  const double band = table1_band(t.trials);
  s += "acceptance band: +/-" + fixed(band, 3);
  if (t.trials < 5000) s += " (widened for fewer than 5000 trials)";
  s += "\n";
  return s;
}

}  // namespace secl
