#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bprnn/dropout.hpp"
#include "bprnn/stack.hpp"
#include "bprnn/tensor.hpp"

namespace bprnn {

// Hidden state of every layer, each (width x batch).
struct StackState {
  std::vector<Tensor2D> h;  // h[i - 1] is layer i

  [[nodiscard]] std::size_t batch() const noexcept { return h.empty() ? 0 : h.front().cols(); }
  friend bool operator==(const StackState&, const StackState&) = default;
};

StackState zero_state(const StackConfig& config, std::size_t batch);

// Symbol ids for `steps` timesteps of `batch` parallel streams, stored [t][b].
class TokenGrid {
 public:
  TokenGrid() = default;
  TokenGrid(std::size_t steps, std::size_t batch);
  TokenGrid(std::size_t steps, std::size_t batch, std::vector<int> ids);

  [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
  [[nodiscard]] std::size_t batch() const noexcept { return batch_; }
  // t is 0-based here.
  int& at(std::size_t t, std::size_t b) noexcept { return ids_[t * batch_ + b]; }
  [[nodiscard]] int at(std::size_t t, std::size_t b) const noexcept {
    return ids_[t * batch_ + b];
  }
  [[nodiscard]] std::span<const int> step(std::size_t t) const noexcept {
    return std::span<const int>(ids_).subspan(t * batch_, batch_);
  }

 private:
  std::size_t steps_ = 0;
  std::size_t batch_ = 0;
  std::vector<int> ids_;
};

struct StepOutput {
  StackState state;
  Tensor2D logits;  // vocab x batch
};

// One timestep (t is 1-based and selects the dropout masks).
StepOutput forward_step(const Model& model, const StackState& state, std::span<const int> tokens,
                        const DropoutMasks& masks, std::size_t t);

// Everything backward() needs from a forward pass.
struct ForwardCache {
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<Tensor2D> initial;               // h_i(0)
  std::vector<Tensor2D> inputs;                // [t - 1] embedding columns
  std::vector<std::vector<Tensor2D>> pre;      // [t - 1][i - 1], empty when frozen
  std::vector<std::vector<Tensor2D>> hidden;   // [t - 1][i - 1] h_i(t)
  std::vector<Tensor2D> probs;                 // [t - 1] softmax output
  TokenGrid targets;
};

struct SequenceResult {
  StackState final_state;
  double loss = 0.0;      // mean cross-entropy in nats over steps x batch
  double loss_sum = 0.0;  // total nats
  std::size_t count = 0;  // number of predictions
  ForwardCache cache;     // left empty when not requested

  [[nodiscard]] double bpc() const;
};

SequenceResult forward_sequence(const Model& model, const StackState& init_state,
                                const TokenGrid& tokens, const TokenGrid& targets,
                                const DropoutMasks& masks, bool keep_cache = true);

// Gradients share the parameter layout; the embedding never gets one.
struct Gradients {
  std::vector<LayerParams> layers;
  Tensor2D V;
  Tensor2D c;
};

Gradients zero_gradients(const Model& model);

enum class LossWeighting {
  MeanOverSequence,  // gradient of SequenceResult::loss
  FinalStepOnly,     // gradient of the mean loss at the last timestep
};

struct BackwardOptions {
  LossWeighting weighting = LossWeighting::MeanOverSequence;
  // Called with (layer, t, dL/dh_layer(t)) once the total gradient on that
  // hidden output is known. Both indices are 1-based.
  std::function<void(std::size_t, std::size_t, const Tensor2D&)> observer;
};

// Exact reverse-mode gradients through time. No clipping or rescaling.
Gradients backward(const ForwardCache& cache, const Model& model, const DropoutMasks& masks,
                   const BackwardOptions& options = {});

double cross_entropy_to_bpc(double nats) noexcept;

}  // namespace bprnn
