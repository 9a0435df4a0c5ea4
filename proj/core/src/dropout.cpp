#include "bprnn/dropout.hpp"

#include <fmt/format.h>

#include "bprnn/errors.hpp"

namespace bprnn {

namespace {

bool valid_probability(double p) { return p >= 0.0 && p < 1.0; }

Tensor2D unit_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
  Tensor2D m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (double& v : m.values()) v = rng.bernoulli(p) ? 0.0 : keep;
  return m;
}

}  // namespace

void DropoutConfig::validate() const {
  if (!valid_probability(p_between) || !valid_probability(p_recurrent) ||
      !valid_probability(p_block)) {
    throw ParameterError(fmt::format("dropout probabilities must lie in [0, 1): {}, {}, {}",
                                     p_between, p_recurrent, p_block));
  }
}

const Tensor2D* DropoutMasks::recurrent_mask(std::size_t layer) const noexcept {
  if (layer == 0 || layer > recurrent.size()) return nullptr;
  const Tensor2D& m = recurrent[layer - 1];
  return m.empty() ? nullptr : &m;
}

const Tensor2D* DropoutMasks::between_mask(std::size_t t, std::size_t layer) const noexcept {
  if (t == 0 || t > between.size()) return nullptr;
  const auto& per_layer = between[t - 1];
  if (layer == 0 || layer > per_layer.size()) return nullptr;
  const Tensor2D& m = per_layer[layer - 1];
  return m.empty() ? nullptr : &m;
}

bool DropoutMasks::alive(std::size_t t, std::size_t block) const noexcept {
  if (t == 0 || t > block_alive.size()) return true;
  const auto& flags = block_alive[t - 1];
  return block >= flags.size() || flags[block] != 0;
}

DropoutMasks sample_masks(const DropoutConfig& cfg, const StackConfig& stack, std::size_t steps,
                          std::size_t batch, Rng& rng) {
  cfg.validate();
  if (steps == 0) throw ParameterError("sample_masks: need at least one timestep");
  DropoutMasks masks;
  masks.block_identity = cfg.block_identity;
  masks.block_freeze = cfg.block_freeze;
  const std::size_t depth = stack.depth;
  const std::size_t h = stack.width;

  masks.recurrent.resize(depth);
  if (cfg.p_recurrent > 0.0) {
    for (auto& m : masks.recurrent) m = unit_mask(h, batch, cfg.p_recurrent, rng);
  }
  if (cfg.p_between > 0.0) {
    masks.between.resize(steps);
    for (auto& per_layer : masks.between) {
      per_layer.resize(depth);
      // Layer 1 reads the embedding, which is never dropped.
      for (std::size_t i = 2; i <= depth; ++i) {
        per_layer[i - 1] = unit_mask(h, batch, cfg.p_between, rng);
      }
    }
  }
  if (cfg.p_block > 0.0) {
    masks.block_alive.assign(steps, std::vector<char>(stack.block_count(), 1));
    for (auto& flags : masks.block_alive) {
      for (auto& f : flags) f = rng.bernoulli(cfg.p_block) ? 0 : 1;
    }
  }
  return masks;
}

}  // namespace bprnn
