#pragma once

#include <stdexcept>
#include <string>

namespace devfuse {

enum class errc {
  domain,
  invalid_weights,
  convergence,
  degenerate_input,
  index,
  shape_mismatch,
  invalid_argument,
  io,
  no_input,
};

inline const char* to_string(errc code) {
  switch (code) {
    case errc::domain: return "domain error";
    case errc::invalid_weights: return "invalid weights";
    case errc::convergence: return "convergence error";
    case errc::degenerate_input: return "degenerate input";
    case errc::index: return "index error";
    case errc::shape_mismatch: return "shape mismatch";
    case errc::invalid_argument: return "invalid argument";
    case errc::io: return "I/O error";
    case errc::no_input: return "no input";
  }
  return "unknown error";
}

/// Base exception of the library. `code()` tells the caller which contract
/// was violated; the message carries the details.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

  /// True when the failure stems from bad caller input rather than from
  /// the computation or the environment.
  bool is_validation() const noexcept {
    switch (code_) {
      case errc::domain:
      case errc::invalid_weights:
      case errc::index:
      case errc::shape_mismatch:
      case errc::invalid_argument:
      case errc::no_input:
        return true;
      default:
        return false;
    }
  }

 private:
  errc code_;
};

/// Bisection ran out of iterations; the last bracket is kept for diagnosis.
class convergence_error : public error {
 public:
  convergence_error(const std::string& what, double lo, double hi)
      : error(errc::convergence, what + " (last bracket [" + std::to_string(lo) + ", " +
                                     std::to_string(hi) + "])"),
        lo_(lo),
        hi_(hi) {}

  double bracket_lo() const noexcept { return lo_; }
  double bracket_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

}  // namespace devfuse
