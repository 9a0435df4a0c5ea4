#include "bprnn/random.hpp"

#include <cmath>

#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include "bprnn/errors.hpp"

namespace bprnn {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

Rng Rng::split(std::uint64_t index) const {
  return Rng(splitmix64(seed_ + (index + 1) * 0x9E3779B97F4A7C15ULL));
}

double Rng::normal() {
  // Stateless: no value is carried between calls.
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

std::size_t Rng::below(std::size_t bound) {
  if (bound == 0) throw ParameterError("Rng::below: bound must be positive");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t b = bound;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % b;
  std::uint64_t x = 0;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % b);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

Tensor2D sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double mean, double std) {
  if (!(std >= 0.0) || !std::isfinite(std) || !std::isfinite(mean)) {
    throw ParameterError(fmt::format("sample_gaussian: invalid std {} / mean {}", std, mean));
  }
  Tensor2D out(rows, cols);
  for (double& x : out.values()) x = mean + std * rng.normal();
  if (std == 0.0) out.fill(mean);
  return out;
}

}  // namespace bprnn
