#include "bprnn/gradflow.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "bprnn/adam.hpp"
#include "bprnn/batching.hpp"
#include "bprnn/errors.hpp"
#include "bprnn/rnn.hpp"

namespace bprnn {

std::size_t GradientFlow::peak_timestep(std::size_t layer) const {
  std::size_t best = 1;
  for (std::size_t t = 2; t <= steps; ++t) {
    if (at(layer, t) > at(layer, best)) best = t;
  }
  return best;
}

std::size_t GradientFlow::peak_lag(std::size_t layer) const {
  return steps - peak_timestep(layer);
}

GradientFlow probe_gradient_flow(const Model& model, std::span<const int> stream,
                                 std::size_t batch_size, std::size_t seq_len,
                                 std::size_t n_batches, double learning_rate) {
  if (n_batches == 0) throw ParameterError("probe_gradient_flow: n_batches must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError(fmt::format("probe_gradient_flow: learning rate {} must be >= 0", learning_rate));
  }
  const SequenceBatches batches(stream, 0, batch_size, seq_len);
  if (batches.count() < n_batches) {
    throw ConfigError(fmt::format("probe needs {} batches of {}x{}, stream only holds {}",
                                  n_batches, batch_size, seq_len, batches.count()));
  }

  const std::size_t depth = model.config.depth;
  GradientFlow flow;
  flow.layers = depth;
  flow.steps = seq_len;
  flow.norms.assign(depth * seq_len, 0.0);

  Model learner = model;
  AdamState adam = make_adam_state(learner);
  const DropoutMasks eval_masks = DropoutMasks::none();
  StackState state = zero_state(model.config, batch_size);
  BackwardOptions options;
  options.weighting = LossWeighting::FinalStepOnly;
  options.observer = [&flow](std::size_t layer, std::size_t t, const Tensor2D& grad) {
    flow.norms[(layer - 1) * flow.steps + (t - 1)] += frobenius_norm(grad);
  };

  for (std::size_t k = 0; k < n_batches; ++k) {
    const auto [inputs, targets] = batches.get(k);
    SequenceResult fwd = forward_sequence(learner, state, inputs, targets, eval_masks);
    backward(fwd.cache, learner, eval_masks, options);
    if (learning_rate > 0.0) {
      adam_update(learner, backward(fwd.cache, learner, eval_masks), adam, learning_rate);
    }
    state = std::move(fwd.final_state);
  }
  for (double& v : flow.norms) v /= static_cast<double>(n_batches);
  return flow;
}

void write_gradflow_csv(std::ostream& out, const GradientFlow& flow) {
  out << "layer,timestep,grad_l2\n";
  for (std::size_t i = 1; i <= flow.layers; ++i) {
    for (std::size_t t = 1; t <= flow.steps; ++t) {
      out << fmt::format("{},{},{}\n", i, t, flow.at(i, t));
    }
  }
}

}  // namespace bprnn
