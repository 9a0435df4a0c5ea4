#pragma once

#include <cstdint>
#include <vector>

#include "bprnn/rnn.hpp"
#include "bprnn/stack.hpp"
#include "bprnn/tensor.hpp"

namespace bprnn {

// Moment accumulators for every trainable tensor, in the order of
// trainable_tensors(): W, U, b per layer, then V and c.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor2D> m;
  std::vector<Tensor2D> v;
};

AdamState make_adam_state(const Model& model, double beta1 = 0.9, double beta2 = 0.999,
                          double epsilon = 1e-8);

std::vector<Tensor2D*> trainable_tensors(Model& model);
std::vector<const Tensor2D*> trainable_tensors(const Model& model);
std::vector<const Tensor2D*> gradient_tensors(const Gradients& grads);

// Bias-corrected Adam step: theta -= lr * m_hat / (sqrt(v_hat) + eps).
// Gradients are used exactly as given.
void adam_update(Model& model, const Gradients& grads, AdamState& state, double lr);

// Same update over explicit tensor lists.
void adam_update(const std::vector<Tensor2D*>& params, const std::vector<const Tensor2D*>& grads,
                 AdamState& state, double lr);

}  // namespace bprnn
