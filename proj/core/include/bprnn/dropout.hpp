#pragma once

#include <cstddef>
#include <vector>

#include "bprnn/random.hpp"
#include "bprnn/stack.hpp"
#include "bprnn/tensor.hpp"

namespace bprnn {

struct DropoutConfig {
  double p_between = 0.0;    // unit dropout on x_i(t) for i >= 2, fresh every timestep
  double p_recurrent = 0.0;  // rnnDrop: one mask on h_i(t-1) for the whole sequence
  double p_block = 0.0;      // stochastic depth over blocks of skip_period layers

  // What a dead block does at a timestep. Both on by default.
  bool block_identity = true;  // block output(t) = block input(t)
  bool block_freeze = true;    // internal states keep h_i(t-1)

  void validate() const;

  [[nodiscard]] bool active() const noexcept {
    return p_between > 0.0 || p_recurrent > 0.0 || p_block > 0.0;
  }

  friend bool operator==(const DropoutConfig&, const DropoutConfig&) = default;
};

// Sampled masks for one sequence. Unit masks are (width x batch) tensors of
// 0 or 1/(1-p) so evaluation needs no rescaling; an empty tensor means "all
// ones". Block flags carry no scaling at all.
struct DropoutMasks {
  std::vector<Tensor2D> recurrent;             // [layer - 1], constant over t
  std::vector<std::vector<Tensor2D>> between;  // [t - 1][layer - 1]
  std::vector<std::vector<char>> block_alive;  // [t - 1][block]
  bool block_identity = true;
  bool block_freeze = true;

  // Evaluation-mode masks: every unit and block alive.
  static DropoutMasks none() { return {}; }

  [[nodiscard]] const Tensor2D* recurrent_mask(std::size_t layer) const noexcept;
  [[nodiscard]] const Tensor2D* between_mask(std::size_t t, std::size_t layer) const noexcept;
  [[nodiscard]] bool alive(std::size_t t, std::size_t block) const noexcept;
};

DropoutMasks sample_masks(const DropoutConfig& cfg, const StackConfig& stack, std::size_t steps,
                          std::size_t batch, Rng& rng);

}  // namespace bprnn
