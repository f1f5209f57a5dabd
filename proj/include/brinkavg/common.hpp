#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace brinkavg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double pi = std::numbers::pi;

// Thrown when an oscillatory integrand would be under-resolved by the grid.
class QuadratureGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a time integration produces non-finite values.
class SimulationAbort : public std::runtime_error {
 public:
  SimulationAbort(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

namespace detail {

template <typename... Args>
std::string concat(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

// Componentwise fractional part with frac(1.0) == 0.0.
inline double frac(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

// FNV-1a, used for cache keys and config hashes.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace detail
}  // namespace brinkavg
