#pragma once

#include <cstdint>
#include <random>

namespace brinkavg {

// Stream tags. Each (base_seed, path, tag) triple owns an independent engine.
enum class StreamTag : std::uint64_t {
  fast_noise = 1,
  initial_fast = 2,
  validation = 3,
  monte_carlo = 4,
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t base_seed, std::uint64_t path, StreamTag tag) {
    std::uint64_t s = detail::splitmix64(base_seed);
    s = detail::splitmix64(s ^ (path + 0x632BE59BD9B4E019ULL));
    s = detail::splitmix64(s ^ static_cast<std::uint64_t>(tag));
    return Rng(s);
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace brinkavg
