#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pullback {

/// Seedable generator used for every random draw in the library: a
/// std::mt19937_64 keyed by (seed, stream) through std::seed_seq. Distinct
/// stream ids give independent substreams, so per-chain or per-sample draws do
/// not depend on evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  Rng substream(std::uint64_t stream) const { return Rng(seed_, stream_ * 0x9E3779B97F4A7C15ULL + stream + 1); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }
  /// Beta(a, b) as X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b).
  double beta(double a, double b);

  template <class T>
  void shuffle(std::vector<T>& values) {
    // Fisher-Yates with our own index draws; std::shuffle is implementation-defined.
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = std::size_t(std::uniform_int_distribution<std::uint64_t>(0, i - 1)(engine_));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

}  // namespace pullback
