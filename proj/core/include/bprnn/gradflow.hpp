#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "bprnn/stack.hpp"

namespace bprnn {

// L2 norms of dL/dh_i(t) for i = 1..layers, t = 1..steps.
struct GradientFlow {
  std::size_t layers = 0;
  std::size_t steps = 0;
  std::vector<double> norms;  // [layer - 1][t - 1]

  [[nodiscard]] double at(std::size_t layer, std::size_t t) const {
    return norms.at((layer - 1) * steps + (t - 1));
  }
  // Timestep with the largest norm at `layer` (earliest on ties).
  [[nodiscard]] std::size_t peak_timestep(std::size_t layer) const;
  // steps - peak_timestep(layer): how far back in time the peak sits.
  [[nodiscard]] std::size_t peak_lag(std::size_t layer) const;
};

// Runs `n_batches` consecutive (batch_size x seq_len) batches of `stream`
// through the model without dropout, hidden state carried between batches.
// For each batch only the loss at the final timestep is backpropagated
// through the whole unrolled graph; the norms are averaged over batches.
//
// With learning_rate > 0 the batches are the first steps of learning: after
// each batch a copy of the model takes an ordinary Adam step on the full
// sequence loss. A freshly initialized model has a zero head and therefore
// no gradient at all until that first step. 0 keeps the model fixed.
GradientFlow probe_gradient_flow(const Model& model, std::span<const int> stream,
                                 std::size_t batch_size, std::size_t seq_len,
                                 std::size_t n_batches = 10, double learning_rate = 2e-4);

// CSV: layer,timestep,grad_l2
void write_gradflow_csv(std::ostream& out, const GradientFlow& flow);

}  // namespace bprnn
