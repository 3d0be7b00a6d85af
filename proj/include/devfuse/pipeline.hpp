#pragma once

// Batch experiments: reduce -> magnify -> score over a corpus of images, the
// per-epsilon best-count sweep, and the MD vs penalty window benchmark.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "devfuse/atomic_file.hpp"
#include "devfuse/baselines.hpp"
#include "devfuse/block_fusion.hpp"
#include "devfuse/deviation.hpp"
#include "devfuse/error.hpp"
#include "devfuse/image_io.hpp"
#include "devfuse/metrics.hpp"
#include "devfuse/multi_matrix.hpp"

namespace devfuse {

/// One reducer in an experiment: either the MD aggregator (swept over
/// epsilon) or a baseline.
struct Method {
  std::string name;
  bool is_md = false;
  AggregatorId baseline;
};

inline Method parse_method(const std::string& name) {
  if (name == "md") return {name, true, {}};
  if (name == "mean") return {name, false, AggregatorId::mean()};
  if (name == "median") return {name, false, AggregatorId::median()};
  if (name == "gaussian") return {name, false, AggregatorId::gaussian()};
  if (name == "geomean") return {name, false, AggregatorId::geometric_mean()};
  if (name == "cowa") return {name, false, AggregatorId::centered_owa()};
  if (name == "min") return {name, false, AggregatorId::min()};
  if (name == "max") return {name, false, AggregatorId::max()};
  if (name == "penalty") return {name, false, AggregatorId::penalty()};
  if (name.size() > 1 && name[0] == 'k') {
    std::size_t used = 0;
    double alpha = 0.0;
    try {
      alpha = std::stod(name.substr(1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == name.size() - 1) return {name, false, AggregatorId::k_alpha(alpha)};
  }
  throw error(errc::invalid_argument, "unknown method '" + name + "'");
}

inline std::vector<std::string> all_method_names() {
  return {"md", "mean", "median", "gaussian", "geomean", "k0.25", "k0.5", "k0.75", "cowa", "penalty"};
}

struct NamedImage {
  std::string id;
  MultiMatrix image;
};

struct ReductionReport {
  std::string image;
  std::string method;
  std::size_t r = 2;
  std::optional<double> eps;
  double ssim = 0.0;
  double mse = 0.0;
  std::int64_t wall_time_ns = 0;
};

struct ExperimentConfig {
  std::vector<std::string> methods = all_method_names();
  std::size_t r = 2;
  std::vector<double> eps_list = {1, 2, 4, 8, 16, 32};
  SsimConfig ssim;
  unsigned threads = 1;
};

struct MethodMean {
  std::string method;
  std::optional<double> eps;
  double ssim = 0.0;
  double mse = 0.0;
  std::size_t images = 0;
};

struct ExperimentResult {
  std::vector<ReductionReport> reports;
  std::vector<MethodMean> means;
  std::vector<std::string> warnings;  // decode failures and the like
};

namespace detail {

struct Scores {
  double ssim;
  double mse;
};

// Magnifies, crops back to the original size and compares with it. SSIM is
// taken on edge-replicated copies padded to the SSIM window.
inline Scores score_reduction(const MultiMatrix& original, const MultiMatrix& reduced,
                              std::size_t r, const SsimConfig& cfg) {
  const auto restored = crop(nn_magnify(reduced, r), original.rows(), original.cols());
  return {ssim_image(pad(restored, cfg.window), pad(original, cfg.window), cfg),
          mse(restored, original)};
}

inline MultiMatrix reduce_with(const MultiMatrix& padded, std::size_t r, const Method& m,
                               std::optional<double> eps) {
  if (m.is_md) return fuse(padded, r, DeviationSpec::epsilon(*eps));
  return reduce_blocks(padded, r, m.baseline);
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(count));
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_eps(std::optional<double> eps) {
  if (!eps) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", *eps);
  return buf;
}

inline void check_eps_list(const std::vector<double>& eps_list) {
  for (double e : eps_list)
    if (!std::isfinite(e) || e < 1.0)
      throw error(errc::domain, "every epsilon must be finite and >= 1");
}

}  // namespace detail

/// Loads every supported image in `dir` (sorted by file name). Files that fail
/// to decode are reported in `warnings` and skipped.
inline std::vector<NamedImage> load_directory(const std::filesystem::path& dir,
                                              std::vector<std::string>& warnings) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw error(errc::no_input, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && is_supported_image(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> images;
  for (const auto& f : files) {
    try {
      images.push_back({f.filename().string(), load_image(f).image});
    } catch (const error& e) {
      warnings.push_back(e.what());
    }
  }
  if (images.empty()) throw error(errc::no_input, "no decodable images in " + dir.string());
  return images;
}

/// For every image and method: pad, reduce (MD with unit channel weights),
/// magnify, crop, and score against the original.
inline ExperimentResult run_reduction(const std::vector<NamedImage>& images,
                                      const ExperimentConfig& cfg) {
  if (images.empty()) throw error(errc::no_input, "no decodable images");
  if (cfg.r < 2) throw error(errc::invalid_argument, "r must be >= 2");
  cfg.ssim.validate();
  detail::check_eps_list(cfg.eps_list);
  std::vector<Method> methods;
  for (const auto& name : cfg.methods) methods.push_back(parse_method(name));

  std::vector<std::vector<ReductionReport>> per_image(images.size());
  detail::parallel_for(images.size(), cfg.threads, [&](std::size_t idx) {
    const auto& img = images[idx];
    for (const auto& method : methods) {
      std::vector<std::optional<double>> eps_values;
      if (method.is_md)
        eps_values.assign(cfg.eps_list.begin(), cfg.eps_list.end());
      else
        eps_values.push_back(std::nullopt);
      for (const auto& eps : eps_values) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto reduced = detail::reduce_with(pad(img.image, cfg.r), cfg.r, method, eps);
        const auto t1 = std::chrono::steady_clock::now();
        const auto s = detail::score_reduction(img.image, reduced, cfg.r, cfg.ssim);
        per_image[idx].push_back(
            {img.id, method.name, cfg.r, eps, s.ssim, s.mse,
             std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()});
      }
    }
  });

  ExperimentResult result;
  for (auto& rows : per_image)
    for (auto& row : rows) result.reports.push_back(std::move(row));
  auto key = [](const ReductionReport& r) {
    return std::make_tuple(r.image, r.method, r.eps.has_value(), r.eps.value_or(0.0));
  };
  std::sort(result.reports.begin(), result.reports.end(),
            [&](const auto& a, const auto& b) { return key(a) < key(b); });

  // Means in the order methods were requested, accumulated in sorted-row order.
  for (const auto& method : methods) {
    std::vector<std::optional<double>> eps_values;
    if (method.is_md)
      eps_values.assign(cfg.eps_list.begin(), cfg.eps_list.end());
    else
      eps_values.push_back(std::nullopt);
    for (const auto& eps : eps_values) {
      MethodMean mm{method.name, eps};
      for (const auto& row : result.reports)
        if (row.method == method.name && row.eps == eps) {
          mm.ssim += row.ssim;
          mm.mse += row.mse;
          ++mm.images;
        }
      if (mm.images > 0) {
        mm.ssim /= static_cast<double>(mm.images);
        mm.mse /= static_cast<double>(mm.images);
      }
      result.means.push_back(mm);
    }
  }
  return result;
}

/// CSV with columns image,method,r,eps,ssim,mse,time_ns.
inline std::string reports_to_csv(const std::vector<ReductionReport>& rows) {
  std::ostringstream out;
  out << "image,method,r,eps,ssim,mse,time_ns\n";
  for (const auto& row : rows)
    out << row.image << ',' << row.method << ',' << row.r << ',' << detail::format_eps(row.eps)
        << ',' << detail::format_double(row.ssim) << ',' << detail::format_double(row.mse) << ','
        << row.wall_time_ns << '\n';
  return out.str();
}

inline ExperimentResult run_reduction_experiment(const std::filesystem::path& dir,
                                                 const ExperimentConfig& cfg,
                                                 const std::filesystem::path& out_csv) {
  std::vector<std::string> warnings;
  const auto images = load_directory(dir, warnings);
  auto result = run_reduction(images, cfg);
  result.warnings = std::move(warnings);
  if (!out_csv.empty()) write_file_atomic(out_csv, reports_to_csv(result.reports));
  return result;
}

struct SweepRow {
  double eps;
  std::size_t best_count;
};

/// For each epsilon, the number of images on which MD scores a strictly
/// higher SSIM than every enabled baseline.
inline std::vector<SweepRow> epsilon_sweep(const std::vector<NamedImage>& images,
                                           const std::vector<double>& eps_list, std::size_t r,
                                           const std::vector<std::string>& baselines,
                                           const SsimConfig& ssim = {}, unsigned threads = 1) {
  if (images.empty()) throw error(errc::no_input, "no decodable images");
  if (r < 2) throw error(errc::invalid_argument, "r must be >= 2");
  detail::check_eps_list(eps_list);
  std::vector<Method> others;
  for (const auto& name : baselines)
    if (name != "md") others.push_back(parse_method(name));

  // wins[image][eps]
  std::vector<std::vector<char>> wins(images.size(), std::vector<char>(eps_list.size(), 0));
  detail::parallel_for(images.size(), threads, [&](std::size_t idx) {
    const auto& img = images[idx].image;
    const auto padded = pad(img, r);
    double best_other = -std::numeric_limits<double>::infinity();
    for (const auto& m : others)
      best_other = std::max(
          best_other, detail::score_reduction(img, reduce_blocks(padded, r, m.baseline), r, ssim).ssim);
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
      const double s =
          detail::score_reduction(img, fuse(padded, r, DeviationSpec::epsilon(eps_list[e])), r, ssim)
              .ssim;
      wins[idx][e] = s > best_other ? 1 : 0;
    }
  });

  std::vector<SweepRow> rows;
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    SweepRow row{eps_list[e], 0};
    for (const auto& w : wins) row.best_count += static_cast<std::size_t>(w[e]);
    rows.push_back(row);
  }
  return rows;
}

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "eps,count\n";
  for (const auto& row : rows) out << detail::format_eps(row.eps) << ',' << row.best_count << '\n';
  return out.str();
}

struct BenchReport {
  std::size_t r = 2;
  std::string method;
  std::size_t windows_processed = 0;
  std::int64_t total_time_ns = 0;
};

struct BenchResult {
  std::vector<BenchReport> reports;
  std::vector<std::pair<std::size_t, double>> speedups;  // (r, penalty time / MD time)
};

struct BenchConfig {
  std::vector<std::size_t> r_list = {2, 3, 4, 5, 6, 7, 8};
  std::size_t window_count = 500;
  std::uint64_t seed = 20240607;
  double eps = 1.0;
  int repeats = 3;  // best-of timing
};

/// Uniform [0, 1] r x r x 3 windows from a mt19937_64 stream seeded with `seed`.
inline std::vector<Block> generate_bench_windows(std::size_t r, std::size_t count,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Block> windows(count);
  for (auto& w : windows) {
    w.r = r;
    w.channels = 3;
    w.data.resize(r * r * 3);
    for (double& v : w.data) v = unit(rng);
  }
  return windows;
}

/// Times the MD closed form (per channel) against the penalty reducer with
/// the five default candidates on identical random windows.
inline BenchResult bench_windows(const BenchConfig& cfg) {
  if (cfg.window_count < 1) throw error(errc::invalid_argument, "window_count must be >= 1");
  if (cfg.repeats < 1) throw error(errc::invalid_argument, "repeats must be >= 1");
  const auto candidates = AggregatorId::default_penalty_candidates();
  BenchResult result;
  volatile double sink = 0.0;
  for (const std::size_t r : cfg.r_list) {
    if (r < 2) throw error(errc::invalid_argument, "bench r must be >= 2");
    const auto windows = generate_bench_windows(r, cfg.window_count, cfg.seed + r);

    auto time_it = [&](auto&& body) {
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (int rep = 0; rep < cfg.repeats; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min<std::int64_t>(
            best, std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
      }
      return best;
    };

    const auto md_ns = time_it([&] {
      double acc = 0.0;
      for (const auto& w : windows)
        for (std::size_t k = 0; k < w.channels; ++k)
          acc += d_mean_epsilon_closed<double>(w.channel(k), cfg.eps);
      sink = sink + acc;
    });
    const auto pen_ns = time_it([&] {
      double acc = 0.0;
      for (const auto& w : windows) acc += penalty_reduce(w, candidates).values[0];
      sink = sink + acc;
    });
    result.reports.push_back({r, "md", cfg.window_count, md_ns});
    result.reports.push_back({r, "penalty", cfg.window_count, pen_ns});
    result.speedups.emplace_back(
        r, static_cast<double>(pen_ns) / static_cast<double>(std::max<std::int64_t>(md_ns, 1)));
  }
  return result;
}

/// CSV with columns r,method,windows,time_ns,speedup (speedup on MD rows).
inline std::string bench_to_csv(const BenchResult& res) {
  std::ostringstream out;
  out << "r,method,windows,time_ns,speedup\n";
  for (const auto& row : res.reports) {
    out << row.r << ',' << row.method << ',' << row.windows_processed << ',' << row.total_time_ns
        << ',';
    if (row.method == "md")
      for (const auto& [r, s] : res.speedups)
        if (r == row.r) out << detail::format_double(s);
    out << '\n';
  }
  return out.str();
}

}  // namespace devfuse
