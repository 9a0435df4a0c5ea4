#pragma once

#include <cstddef>
#include <cstdint>

#include "bprnn/tensor.hpp"

namespace bprnn {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// SplitMix64 as a standard UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    result_type z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Seeded, splittable random source.
//
// Engine: SplitMix64 (Steele, Lea & Flood 2014) started at the seed.
// Uniform doubles: top 53 bits of one engine draw, scaled to [0, 1).
// Normals: Boost's ziggurat normal_distribution driven by the same engine.
// Splitting: child k is seeded with splitmix64(seed + (k + 1) * 0x9E3779B97F4A7C15),
// a function of the parent seed and k only, never of how far the parent
// stream has advanced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] Rng split(std::uint64_t index) const;

  std::uint64_t next_u64() noexcept { return engine_(); }
  double uniform() noexcept {  // [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double normal();                       // N(0, 1)
  std::size_t below(std::size_t bound);  // uniform on [0, bound), bound > 0
  bool bernoulli(double p);              // true with probability p

 private:
  std::uint64_t seed_;
  SplitMix64 engine_;
};

// i.i.d. N(mean, std^2) tensor, filled in row-major order.
Tensor2D sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double mean, double std);

}  // namespace bprnn
