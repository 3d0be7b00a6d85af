#pragma once

// Shared helpers for the test suites: seeded generators and synthetic images.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "devfuse/multi_matrix.hpp"
#include "devfuse/pipeline.hpp"

namespace devfuse::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }
  std::vector<double> vec(std::size_t n, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = uniform(lo, hi);
    return v;
  }
  MultiMatrix matrix(std::size_t rows, std::size_t cols, std::size_t channels, double lo = 0.0,
                     double hi = 1.0) {
    MultiMatrix m(rows, cols, channels);
    for (double& x : m.data()) x = uniform(lo, hi);
    return m;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Smooth colour gradients, a few discs and rectangles, and mild noise,
/// quantized to the 8-bit lattice so images round-trip through files.
inline MultiMatrix synthetic_image(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Gen g(seed);
  MultiMatrix m(rows, cols, 3);
  double base[3], gx[3], gy[3];
  for (int k = 0; k < 3; ++k) {
    base[k] = g.uniform(0.2, 0.6);
    gx[k] = g.uniform(-0.3, 0.3);
    gy[k] = g.uniform(-0.3, 0.3);
  }
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        m(i, j, k) = base[k] + gx[k] * j / cols + gy[k] * i / rows;
  const int shapes = 3 + static_cast<int>(g.index(4));
  for (int s = 0; s < shapes; ++s) {
    const double ci = g.uniform(0, rows);
    const double cj = g.uniform(0, cols);
    const double rad = g.uniform(3, rows / 4.0);
    const bool disc = g.uniform() < 0.5;
    double colour[3];
    for (double& c : colour) c = g.uniform();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        const double di = i - ci;
        const double dj = j - cj;
        const bool inside = disc ? di * di + dj * dj < rad * rad
                                 : std::abs(di) < rad && std::abs(dj) < rad * 0.6;
        if (inside)
          for (std::size_t k = 0; k < 3; ++k) m(i, j, k) = colour[k];
      }
  }
  for (double& v : m.data()) {
    v += g.uniform(-0.03, 0.03);
    v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
  }
  return m;
}

inline std::vector<NamedImage> synthetic_corpus(std::size_t count, std::size_t rows,
                                                std::size_t cols, std::uint64_t seed) {
  std::vector<NamedImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synthetic_%02zu", i);
    out.push_back({name, synthetic_image(rows, cols, seed + i)});
  }
  return out;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("devfuse_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace devfuse::testing
