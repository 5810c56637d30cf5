#pragma once

// Seed derivation and the small set of sampling helpers the generators use.
//
// std::mt19937_64 is bit-identical across standard libraries, but the
// std::*_distribution templates are not, so sampling is done here with
// explicit formulas on top of the raw engine output.

#include <cstdint>
#include <random>
#include <span>

namespace synthfridge {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Child seed for `key` under `parent`. Distinct keys give statistically
// independent streams, and adding a new key never changes existing children.
inline constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) noexcept {
  return splitmix64(splitmix64(parent) ^ splitmix64(key * 0xD1B54A32D192ED03ULL + 1));
}

// Stream keys used under a scene seed. Values are part of the on-disk
// reproducibility contract; append new ones, never renumber.
enum class Stream : std::uint64_t {
  object_count = 1,
  models = 2,
  pattern = 3,
  placement = 4,
  lights = 5,
  cameras = 6,
  materials = 7,
  fridge = 8,
  render_camera = 9,
};

inline constexpr std::uint64_t derive_seed(std::uint64_t parent, Stream key) noexcept {
  return derive_seed(parent, static_cast<std::uint64_t>(key));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t parent, Stream stream) : engine_(derive_seed(parent, stream)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in the closed range [lo, hi], rejection-sampled.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r = next();
    while (r >= limit) r = next();
    return lo + static_cast<std::int64_t>(r % span);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1)); }

  // Index drawn with probability proportional to weights[i]. At least one
  // weight must be positive.
  std::size_t weighted(std::span<const double> weights) {
    double total = 0;
    for (double w : weights) total += w;
    double r = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0) continue;
      if (r < weights[i]) return i;
      r -= weights[i];
    }
    for (std::size_t i = weights.size(); i-- > 0;)
      if (weights[i] > 0) return i;
    return 0;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace synthfridge
