#pragma once

// Subcommand dispatch for the devfuse binary. Kept in a header so the tests
// can drive it in-process.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "devfuse/devfuse.hpp"

namespace devfuse::cli {

enum exit_code : int { ok = 0, validation_failure = 1, runtime_failure = 2 };

struct GradCheckSummary {
  std::size_t trials = 0;
  double max_rel_input = 0.0;
  double max_rel_weight = 0.0;
};

namespace detail {

inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
  return std::sqrt(diff) / scale;
}

inline double pooled_loss(const Tensor3& t, const PoolParams& p, const Tensor3& g) {
  const auto y = md_pool_forward(t, p);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += y.data()[i] * g.data()[i];
  return acc;
}

}  // namespace detail

/// Random LMD trials comparing the analytic backward pass with central
/// finite differences of L = sum grad_out * forward.
inline GradCheckSummary pool_grad_check(std::size_t trials, const std::vector<std::size_t>& r_list,
                                        const std::vector<double>& eps_list, std::uint64_t seed,
                                        double h = 1e-6) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  std::uniform_real_distribution<double> upstream(0.1, 1.0);
  GradCheckSummary s;
  for (std::size_t t = 0; t < trials; ++t) {
    PoolParams p;
    p.r = r_list[t % r_list.size()];
    p.epsilon = eps_list[(t / r_list.size()) % eps_list.size()];
    p.mode = PoolMode::lmd;
    const std::size_t channels = 1 + t % 3;
    const std::size_t h_blocks = 1 + (t / 3) % 2;
    const std::size_t w_blocks = 1 + (t / 6) % 2;
    Tensor3 x(h_blocks * p.r, w_blocks * p.r, channels);
    for (double& v : x.data()) v = unit(rng);
    for (std::size_t c = 0; c < channels; ++c) p.weights.push_back(weight(rng));
    Tensor3 g(h_blocks, w_blocks, channels);
    for (double& v : g.data()) v = upstream(rng);

    const auto analytic = md_pool_backward(x, p, g);
    std::vector<double> fd_in(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      Tensor3 plus = x;
      Tensor3 minus = x;
      plus.data()[i] += h;
      minus.data()[i] -= h;
      fd_in[i] = (detail::pooled_loss(plus, p, g) - detail::pooled_loss(minus, p, g)) / (2.0 * h);
    }
    std::vector<double> fd_w(channels);
    for (std::size_t c = 0; c < channels; ++c) {
      PoolParams plus = p;
      PoolParams minus = p;
      plus.weights[c] += h;
      minus.weights[c] -= h;
      fd_w[c] = (detail::pooled_loss(x, plus, g) - detail::pooled_loss(x, minus, g)) / (2.0 * h);
    }
    const auto gi = analytic.grad_input.data();
    s.max_rel_input = std::max(
        s.max_rel_input, detail::rel_error(std::vector<double>(gi.begin(), gi.end()), fd_in));
    s.max_rel_weight = std::max(s.max_rel_weight, detail::rel_error(analytic.grad_weights, fd_w));
    ++s.trials;
  }
  return s;
}

struct SelftestSummary {
  std::size_t cases = 0;
  double max_oracle_gap = 0.0;
  std::size_t idempotency_failures = 0;
};

/// Closed form vs bisection on random blocks, and idempotency of both.
inline SelftestSummary selftest(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double eps_values[] = {1.0, 2.0, 4.0, 32.0};
  SelftestSummary s;
  for (std::size_t t = 0; t < cases; ++t) {
    const std::size_t r = 2 + t % 3;
    const double eps = eps_values[t % 4];
    std::vector<double> v(r * r);
    std::vector<double> w(r * r);
    for (double& x : v) x = unit(rng);
    for (double& x : w) x = unit(rng) + 0.05;
    const auto spec = DeviationSpec::epsilon(eps);
    const double closed = d_mean_epsilon_closed<double>(v, w, eps);
    const double bisect = d_mean_bisect(spec, v, w);
    s.max_oracle_gap = std::max(s.max_oracle_gap, std::abs(closed - bisect));
    const std::vector<double> constant(r * r, v[0]);
    if (d_mean_epsilon_closed<double>(constant, w, eps) != v[0]) ++s.idempotency_failures;
    if (std::abs(d_mean_bisect(spec, constant, w) - v[0]) > 1e-9) ++s.idempotency_failures;
    ++s.cases;
  }
  return s;
}

namespace detail {

inline std::string join(const auto& values) {
  std::ostringstream out;
  bool first = true;
  for (const auto& v : values) {
    if (!first) out << ',';
    out << v;
    first = false;
  }
  return out.str();
}

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_file_atomic(path, text);
}

inline nlohmann::json decide_json(const nlohmann::json& prefs, const nlohmann::json* weights_doc,
                                  double eps, double diagonal) {
  if (!prefs.is_object() || !prefs.contains("experts") || !prefs["experts"].is_array())
    throw error(errc::invalid_argument, "preference file needs an \"experts\" array");
  const auto& experts = prefs["experts"];
  if (experts.empty()) throw error(errc::invalid_argument, "no experts given");
  std::size_t p = 0;
  if (prefs.contains("alternatives"))
    p = prefs["alternatives"].get<std::size_t>();
  else
    p = experts[0].at("matrix").size();
  if (prefs.contains("diagonal")) diagonal = prefs["diagonal"].get<double>();

  PreferenceTensor x(p, experts.size(), diagonal);
  for (std::size_t k = 0; k < experts.size(); ++k) {
    if (!experts[k].contains("matrix"))
      throw error(errc::invalid_argument, "expert " + std::to_string(k + 1) + " has no matrix");
    x.set_expert(k, experts[k]["matrix"].get<std::vector<std::vector<double>>>());
  }

  std::vector<double> w(experts.size(), 1.0);
  if (weights_doc) {
    const auto& doc = weights_doc->is_object() ? weights_doc->at("weights") : *weights_doc;
    w = doc.get<std::vector<double>>();
  }

  const auto c = collective_matrix(x, w, eps);
  const auto col = preference_column(c, eps);
  nlohmann::json out;
  out["collective"] = nlohmann::json::array();
  for (std::size_t i = 0; i < p; ++i) {
    const auto row = c.row(i);
    out["collective"].push_back(std::vector<double>(row.begin(), row.end()));
  }
  out["column"] = col.d;
  std::vector<std::size_t> ranking;
  for (auto idx : col.ranking) ranking.push_back(idx + 1);
  out["ranking"] = ranking;
  return out;
}

}  // namespace detail

/// Runs one CLI invocation. Returns 0 on success, 1 on invalid input and 2 on
/// runtime failure; diagnostics go to `err` as a single line.
inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"devfuse: moderate-deviation fusion of multi-valued matrices"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 20240607;
  app.add_option("--seed", seed, "Random seed (DEVFUSE_SEED overrides)")->capture_default_str();
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads for batch processing")
      ->capture_default_str()
      ->check(CLI::Range(1u, 256u));

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "Reduce, magnify and score every image in a directory");
  std::string fuse_input;
  std::vector<std::string> fuse_methods = all_method_names();
  std::size_t fuse_r = 2;
  std::vector<double> fuse_eps = {1, 2, 4, 8, 16, 32};
  std::string fuse_out = "report.csv";
  std::size_t ssim_window = 8;
  fuse_cmd->add_option("--input", fuse_input, "Directory of PNG/PPM images")->required();
  fuse_cmd->add_option("--methods", fuse_methods, "Comma-separated reducers")
      ->delimiter(',')
      ->capture_default_str();
  fuse_cmd->add_option("--r", fuse_r, "Block size")->capture_default_str()->check(CLI::Range(2, 1 << 16));
  fuse_cmd->add_option("--eps", fuse_eps, "Comma-separated epsilon values for md")
      ->delimiter(',')
      ->capture_default_str();
  fuse_cmd->add_option("--out", fuse_out, "CSV report path")->capture_default_str();
  fuse_cmd->add_option("--ssim-window", ssim_window, "SSIM window size")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 16));

  // sweep-eps
  auto* sweep_cmd = app.add_subcommand("sweep-eps", "Count images where md is strictly best, per epsilon");
  std::string sweep_input;
  std::vector<double> sweep_eps = {1, 2, 4, 8, 16, 32, 64, 128};
  std::size_t sweep_r = 2;
  std::vector<std::string> sweep_methods = all_method_names();
  std::string sweep_out = "sweep.csv";
  sweep_cmd->add_option("--input", sweep_input, "Directory of PNG/PPM images")->required();
  sweep_cmd->add_option("--eps", sweep_eps, "Comma-separated epsilon values")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--r", sweep_r, "Block size")->capture_default_str()->check(CLI::Range(2, 1 << 16));
  sweep_cmd->add_option("--methods", sweep_methods, "Competing reducers (md itself is ignored)")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "CSV output path")->capture_default_str();
  sweep_cmd->add_option("--ssim-window", ssim_window, "SSIM window size")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 16));

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Time md against the penalty reducer on random windows");
  BenchConfig bench;
  std::string bench_out = "bench.csv";
  bench_cmd->add_option("--r", bench.r_list, "Comma-separated window sizes")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--windows", bench.window_count, "Windows per size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repeats", bench.repeats, "Timing repeats (best is kept)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--eps", bench.eps, "Epsilon for md")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "CSV output path")->capture_default_str();

  // pool-grad-check
  auto* grad_cmd = app.add_subcommand("pool-grad-check", "Check LMD pooling gradients by finite differences");
  std::size_t grad_trials = 1000;
  std::vector<std::size_t> grad_r = {2, 3};
  std::vector<double> grad_eps = {1, 2, 32};
  double grad_tol = 1e-6;
  grad_cmd->add_option("--trials", grad_trials, "Number of random trials")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  grad_cmd->add_option("--r", grad_r, "Comma-separated pooling window sizes")
      ->delimiter(',')
      ->capture_default_str();
  grad_cmd->add_option("--eps", grad_eps, "Comma-separated epsilon values")
      ->delimiter(',')
      ->capture_default_str();
  grad_cmd->add_option("--tolerance", grad_tol, "Maximum accepted relative error")
      ->capture_default_str();

  // decide
  auto* decide_cmd = app.add_subcommand("decide", "Fuse expert preference matrices and rank alternatives");
  std::string decide_input;
  std::string decide_weights;
  double decide_eps = 1.0;
  double decide_diag = 0.5;
  std::string decide_out;
  decide_cmd->add_option("--input", decide_input, "Preference JSON")->required();
  decide_cmd->add_option("--weights", decide_weights, "Expert weight JSON (array or {\"weights\": [...]})");
  decide_cmd->add_option("--eps", decide_eps, "Epsilon")->capture_default_str();
  decide_cmd->add_option("--diagonal", decide_diag, "Fixed diagonal value")->capture_default_str();
  decide_cmd->add_option("--out", decide_out, "Output JSON path (stdout when omitted)");

  // selftest
  auto* self_cmd = app.add_subcommand("selftest", "Run oracle-equivalence and idempotency checks");
  std::size_t self_cases = 2000;
  self_cmd->add_option("--cases", self_cases, "Random cases")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : validation_failure;
  }

  if (const char* env = std::getenv("DEVFUSE_SEED")) {
    try {
      seed = std::stoull(env);
    } catch (const std::exception&) {
      err << "devfuse: DEVFUSE_SEED is not an unsigned integer\n";
      return validation_failure;
    }
  }
  auto config_line = [&](const std::string& sub, const std::string& rest) {
    err << "# devfuse " << sub << " seed=" << seed << " threads=" << threads << ' ' << rest << '\n';
  };

  try {
    if (*fuse_cmd) {
      config_line("fuse", "input=" + fuse_input + " methods=" + detail::join(fuse_methods) +
                              " r=" + std::to_string(fuse_r) + " eps=" + detail::join(fuse_eps) +
                              " ssim_window=" + std::to_string(ssim_window) + " out=" + fuse_out);
      ExperimentConfig cfg;
      cfg.methods = fuse_methods;
      cfg.r = fuse_r;
      cfg.eps_list = fuse_eps;
      cfg.ssim.window = ssim_window;
      cfg.threads = threads;
      const auto res = run_reduction_experiment(fuse_input, cfg, fuse_out);
      for (const auto& w : res.warnings) err << "warning: " << w << '\n';
      out << "method,eps,mean_ssim,mean_mse,images\n";
      for (const auto& m : res.means) {
        out << m.method << ',' << devfuse::detail::format_eps(m.eps) << ','
            << std::setprecision(6) << std::fixed << m.ssim << ',' << m.mse << ','
            << m.images << '\n';
        out.unsetf(std::ios::fixed);
      }
    } else if (*sweep_cmd) {
      config_line("sweep-eps", "input=" + sweep_input + " eps=" + detail::join(sweep_eps) +
                                   " r=" + std::to_string(sweep_r) +
                                   " methods=" + detail::join(sweep_methods) + " out=" + sweep_out);
      std::vector<std::string> warnings;
      const auto images = load_directory(sweep_input, warnings);
      for (const auto& w : warnings) err << "warning: " << w << '\n';
      SsimConfig ssim;
      ssim.window = ssim_window;
      const auto rows = epsilon_sweep(images, sweep_eps, sweep_r, sweep_methods, ssim, threads);
      const auto csv = sweep_to_csv(rows);
      detail::emit(csv, sweep_out, out);
      if (!sweep_out.empty() && sweep_out != "-") out << csv;
    } else if (*bench_cmd) {
      bench.seed = seed;
      config_line("bench", "r=" + detail::join(bench.r_list) +
                               " windows=" + std::to_string(bench.window_count) +
                               " repeats=" + std::to_string(bench.repeats) +
                               " eps=" + std::to_string(bench.eps) + " out=" + bench_out);
      const auto res = bench_windows(bench);
      const auto csv = bench_to_csv(res);
      detail::emit(csv, bench_out, out);
      if (!bench_out.empty() && bench_out != "-") out << csv;
    } else if (*grad_cmd) {
      config_line("pool-grad-check", "trials=" + std::to_string(grad_trials) +
                                         " r=" + detail::join(grad_r) +
                                         " eps=" + detail::join(grad_eps));
      if (grad_r.empty() || grad_eps.empty())
        throw error(errc::invalid_argument, "--r and --eps need at least one value");
      const auto s = pool_grad_check(grad_trials, grad_r, grad_eps, seed);
      const bool pass = s.max_rel_input < grad_tol && s.max_rel_weight < grad_tol;
      out << "trials=" << s.trials << " max_rel_err_input=" << std::scientific
          << std::setprecision(3) << s.max_rel_input << " max_rel_err_weight=" << s.max_rel_weight
          << ' ' << (pass ? "PASS" : "FAIL") << '\n';
      out.unsetf(std::ios::scientific);
      return pass ? ok : runtime_failure;
    } else if (*decide_cmd) {
      config_line("decide", "input=" + decide_input + " weights=" +
                                (decide_weights.empty() ? "unit" : decide_weights) +
                                " eps=" + std::to_string(decide_eps) +
                                " out=" + (decide_out.empty() ? "stdout" : decide_out));
      nlohmann::json prefs;
      nlohmann::json weights;
      try {
        prefs = nlohmann::json::parse(read_file(decide_input));
        if (!decide_weights.empty()) weights = nlohmann::json::parse(read_file(decide_weights));
      } catch (const nlohmann::json::exception& e) {
        throw error(errc::invalid_argument, std::string("malformed JSON: ") + e.what());
      }
      nlohmann::json result;
      try {
        result = detail::decide_json(prefs, decide_weights.empty() ? nullptr : &weights,
                                     decide_eps, decide_diag);
      } catch (const nlohmann::json::exception& e) {
        throw error(errc::invalid_argument, std::string("unexpected JSON layout: ") + e.what());
      }
      detail::emit(result.dump(2) + "\n", decide_out, out);
    } else if (*self_cmd) {
      config_line("selftest", "cases=" + std::to_string(self_cases));
      const auto s = selftest(self_cases, seed);
      const bool pass = s.max_oracle_gap < 1e-7 && s.idempotency_failures == 0;
      out << "oracle-equivalence cases=" << s.cases << " max_gap=" << std::scientific
          << std::setprecision(3) << s.max_oracle_gap << (s.max_oracle_gap < 1e-7 ? " PASS" : " FAIL")
          << '\n';
      out.unsetf(std::ios::scientific);
      out << "idempotency failures=" << s.idempotency_failures
          << (s.idempotency_failures == 0 ? " PASS" : " FAIL") << '\n';
      return pass ? ok : runtime_failure;
    }
  } catch (const error& e) {
    err << "devfuse: " << e.what() << '\n';
    return e.is_validation() ? validation_failure : runtime_failure;
  } catch (const std::exception& e) {
    err << "devfuse: " << e.what() << '\n';
    return runtime_failure;
  }
  return ok;
}

}  // namespace devfuse::cli
