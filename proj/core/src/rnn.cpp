#include "bprnn/rnn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include <fmt/format.h>

#include "bprnn/errors.hpp"

namespace bprnn {

namespace {

void check_tokens(std::span<const int> tokens, std::size_t vocab) {
  for (int id : tokens) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw VocabularyError(fmt::format("symbol id {} outside vocabulary of size {}", id, vocab));
    }
  }
}

Tensor2D gather_embedding(const Tensor2D& embedding, std::span<const int> tokens) {
  Tensor2D out(embedding.rows(), tokens.size());
  for (std::size_t r = 0; r < embedding.rows(); ++r) {
    for (std::size_t b = 0; b < tokens.size(); ++b) {
      out(r, b) = embedding(r, static_cast<std::size_t>(tokens[b]));
    }
  }
  return out;
}

// True when the vertical output of `layer` at timestep t is the block input
// passed through a dead block rather than h_layer(t).
bool passes_block_input(const StackConfig& cfg, const DropoutMasks& masks, std::size_t t,
                        std::size_t layer) {
  if (!masks.block_identity) return false;
  const std::size_t block = cfg.block_of(layer);
  return layer == cfg.block_last(block) && !masks.alive(t, block);
}

bool layer_frozen(const StackConfig& cfg, const DropoutMasks& masks, std::size_t t,
                  std::size_t layer) {
  return masks.block_freeze && !masks.alive(t, cfg.block_of(layer));
}

// Masked copy `x * mask`, or x itself when there is no mask.
const Tensor2D& masked(const Tensor2D& x, const Tensor2D* mask, Tensor2D& scratch) {
  if (mask == nullptr) return x;
  scratch = x;
  kernels::hadamard_inplace(scratch, *mask);
  return scratch;
}

// Runs every layer for one timestep. `vertical[j]` ends up pointing at v_j(t).
void step_layers(const Model& model, const std::vector<Tensor2D>& prev, const Tensor2D& input,
                 const DropoutMasks& masks, std::size_t t, std::vector<Tensor2D>& next,
                 std::vector<Tensor2D>* pre_out, std::vector<const Tensor2D*>& vertical) {
  const StackConfig& cfg = model.config;
  const std::size_t depth = cfg.depth;
  next.resize(depth);
  if (pre_out != nullptr) pre_out->assign(depth, Tensor2D{});
  vertical.assign(depth + 1, nullptr);
  vertical[0] = &input;
  Tensor2D rec_scratch;
  Tensor2D in_scratch;

  for (std::size_t i = 1; i <= depth; ++i) {
    if (layer_frozen(cfg, masks, t, i)) {
      next[i - 1] = prev[i - 1];
    } else {
      const LayerParams& p = model.layer(i);
      const std::size_t batch = prev[i - 1].cols();
      Tensor2D pre(cfg.width, batch);
      kernels::add_column_broadcast(pre, p.b);
      kernels::gemm_accumulate(pre, p.W, Transpose::No,
                               masked(prev[i - 1], masks.recurrent_mask(i), rec_scratch),
                               Transpose::No);
      kernels::gemm_accumulate(pre, p.U, Transpose::No,
                               masked(*vertical[i - 1], masks.between_mask(t, i), in_scratch),
                               Transpose::No);
      Tensor2D h = pre;
      apply_inplace(cfg.activation, h);
      if (cfg.has_skip(i)) kernels::axpy(h, *vertical[i - cfg.skip_period], cfg.skip_scale);
      if (!all_finite(h.values())) {
        throw DivergenceError(
            fmt::format("divergence: non-finite activation at layer {} timestep {}", i, t), i, t);
      }
      next[i - 1] = std::move(h);
      if (pre_out != nullptr) (*pre_out)[i - 1] = std::move(pre);
    }
    vertical[i] = passes_block_input(cfg, masks, t, i)
                      ? vertical[cfg.block_first(cfg.block_of(i)) - 1]
                      : &next[i - 1];
  }
}

Tensor2D head_logits(const Model& model, const Tensor2D& top, std::size_t t) {
  Tensor2D logits(model.config.vocab_size, top.cols());
  kernels::add_column_broadcast(logits, model.head.c);
  kernels::gemm_accumulate(logits, model.head.V, Transpose::No, top, Transpose::No);
  if (!all_finite(logits.values())) {
    throw DivergenceError(fmt::format("divergence: non-finite logits at timestep {}", t), 0, t);
  }
  return logits;
}

// Column-wise softmax in place; returns the summed -log p(target).
double softmax_cross_entropy(Tensor2D& logits, std::span<const int> targets) {
  const std::size_t vocab = logits.rows();
  const std::size_t batch = logits.cols();
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    double mx = logits(0, b);
    for (std::size_t r = 1; r < vocab; ++r) mx = std::max(mx, logits(r, b));
    const auto target = static_cast<std::size_t>(targets[b]);
    const double shifted_target = logits(target, b) - mx;
    double sum = 0.0;
    for (std::size_t r = 0; r < vocab; ++r) {
      const double e = std::exp(logits(r, b) - mx);
      logits(r, b) = e;
      sum += e;
    }
    // log-sum-exp form: stays finite when p(target) underflows
    loss += std::log(sum) - shifted_target;
    for (std::size_t r = 0; r < vocab; ++r) logits(r, b) /= sum;
  }
  return loss;
}

}  // namespace

StackState zero_state(const StackConfig& config, std::size_t batch) {
  StackState s;
  s.h.assign(config.depth, Tensor2D(config.width, batch));
  return s;
}

TokenGrid::TokenGrid(std::size_t steps, std::size_t batch)
    : steps_(steps), batch_(batch), ids_(steps * batch, 0) {}

TokenGrid::TokenGrid(std::size_t steps, std::size_t batch, std::vector<int> ids)
    : steps_(steps), batch_(batch), ids_(std::move(ids)) {
  if (ids_.size() != steps * batch) {
    throw ShapeError(fmt::format("token grid {}x{} needs {} ids, got {}", steps, batch,
                                 steps * batch, ids_.size()));
  }
}

double cross_entropy_to_bpc(double nats) noexcept { return nats / std::numbers::ln2; }

double SequenceResult::bpc() const { return cross_entropy_to_bpc(loss); }

StepOutput forward_step(const Model& model, const StackState& state, std::span<const int> tokens,
                        const DropoutMasks& masks, std::size_t t) {
  const StackConfig& cfg = model.config;
  if (state.h.size() != cfg.depth) {
    throw ShapeError(fmt::format("state has {} layers, model {}", state.h.size(), cfg.depth));
  }
  for (const auto& h : state.h) {
    if (h.rows() != cfg.width || h.cols() != tokens.size()) {
      throw ShapeError(fmt::format("state tensor {} does not match width {} batch {}",
                                   h.shape_string(), cfg.width, tokens.size()));
    }
    require_finite(h, "hidden state");
  }
  check_tokens(tokens, cfg.vocab_size);
  const Tensor2D input = gather_embedding(model.head.embedding, tokens);
  StepOutput out;
  std::vector<const Tensor2D*> vertical;
  step_layers(model, state.h, input, masks, t, out.state.h, nullptr, vertical);
  out.logits = head_logits(model, *vertical[cfg.depth], t);
  return out;
}

SequenceResult forward_sequence(const Model& model, const StackState& init_state,
                                const TokenGrid& tokens, const TokenGrid& targets,
                                const DropoutMasks& masks, bool keep_cache) {
  const StackConfig& cfg = model.config;
  const std::size_t steps = tokens.steps();
  const std::size_t batch = tokens.batch();
  if (steps == 0 || batch == 0) throw ParameterError("forward_sequence: need T >= 1 and batch >= 1");
  if (targets.steps() != steps || targets.batch() != batch) {
    throw ShapeError("forward_sequence: tokens and targets differ in shape");
  }
  if (init_state.h.size() != cfg.depth || init_state.batch() != batch) {
    throw ShapeError("forward_sequence: initial state does not match model/batch");
  }

  SequenceResult result;
  ForwardCache& cache = result.cache;
  if (keep_cache) {
    cache.steps = steps;
    cache.batch = batch;
    cache.initial = init_state.h;
    cache.inputs.reserve(steps);
    cache.pre.reserve(steps);
    cache.hidden.reserve(steps);
    cache.probs.reserve(steps);
    cache.targets = targets;
  }

  std::vector<Tensor2D> prev = init_state.h;
  std::vector<Tensor2D> next;
  std::vector<Tensor2D> pre;
  std::vector<const Tensor2D*> vertical;
  for (std::size_t t = 1; t <= steps; ++t) {
    const auto in_ids = tokens.step(t - 1);
    const auto out_ids = targets.step(t - 1);
    check_tokens(in_ids, cfg.vocab_size);
    check_tokens(out_ids, cfg.vocab_size);
    Tensor2D input = gather_embedding(model.head.embedding, in_ids);
    step_layers(model, prev, input, masks, t, next, keep_cache ? &pre : nullptr, vertical);
    Tensor2D probs = head_logits(model, *vertical[cfg.depth], t);
    result.loss_sum += softmax_cross_entropy(probs, out_ids);
    if (keep_cache) {
      cache.inputs.push_back(std::move(input));
      cache.pre.push_back(std::move(pre));
      cache.hidden.push_back(next);
      cache.probs.push_back(std::move(probs));
    }
    std::swap(prev, next);
  }
  if (!std::isfinite(result.loss_sum)) {
    throw DivergenceError("divergence: non-finite loss", 0, steps);
  }
  result.count = steps * batch;
  result.loss = result.loss_sum / static_cast<double>(result.count);
  result.final_state.h = std::move(prev);
  return result;
}

Gradients zero_gradients(const Model& model) {
  Gradients g;
  g.layers.reserve(model.layers.size());
  for (const auto& p : model.layers) {
    g.layers.push_back(LayerParams{Tensor2D(p.W.rows(), p.W.cols()),
                                   Tensor2D(p.U.rows(), p.U.cols()),
                                   Tensor2D(p.b.rows(), p.b.cols())});
  }
  g.V = Tensor2D(model.head.V.rows(), model.head.V.cols());
  g.c = Tensor2D(model.head.c.rows(), model.head.c.cols());
  return g;
}

Gradients backward(const ForwardCache& cache, const Model& model, const DropoutMasks& masks,
                   const BackwardOptions& options) {
  const StackConfig& cfg = model.config;
  const std::size_t steps = cache.steps;
  const std::size_t batch = cache.batch;
  const std::size_t depth = cfg.depth;
  if (steps == 0 || cache.hidden.size() != steps) {
    throw ParameterError("backward: cache does not come from a completed forward pass");
  }

  Gradients g = zero_gradients(model);
  std::vector<Tensor2D> carry(depth, Tensor2D(cfg.width, batch));  // dL/dh_i(t) from t+1
  std::vector<Tensor2D> grad_v(depth + 1);                          // dL/dv_j(t)
  Tensor2D dz(cfg.vocab_size, batch);
  Tensor2D grad_h;
  Tensor2D grad_pre;
  Tensor2D scratch;
  Tensor2D scratch2;

  for (std::size_t t = steps; t >= 1; --t) {
    const auto& hidden = cache.hidden[t - 1];
    const auto& pre = cache.pre[t - 1];
    const auto targets = cache.targets.step(t - 1);

    // Rebuild the vertical outputs of this timestep.
    std::vector<const Tensor2D*> vertical(depth + 1, nullptr);
    vertical[0] = &cache.inputs[t - 1];
    for (std::size_t i = 1; i <= depth; ++i) {
      vertical[i] = passes_block_input(cfg, masks, t, i)
                        ? vertical[cfg.block_first(cfg.block_of(i)) - 1]
                        : &hidden[i - 1];
    }
    for (std::size_t j = 1; j <= depth; ++j) {
      if (grad_v[j].empty()) {
        grad_v[j] = Tensor2D(cfg.width, batch);
      } else {
        grad_v[j].fill(0.0);
      }
    }

    // Softmax + cross-entropy head.
    double weight = 0.0;
    if (options.weighting == LossWeighting::MeanOverSequence) {
      weight = 1.0 / static_cast<double>(steps * batch);
    } else if (t == steps) {
      weight = 1.0 / static_cast<double>(batch);
    }
    if (weight != 0.0) {
      dz = cache.probs[t - 1];
      for (std::size_t b = 0; b < batch; ++b) dz(static_cast<std::size_t>(targets[b]), b) -= 1.0;
      for (double& v : dz.values()) v *= weight;
      kernels::gemm_accumulate(g.V, dz, Transpose::No, *vertical[depth], Transpose::Yes);
      kernels::accumulate_row_sums(g.c, dz);
      kernels::gemm_accumulate(grad_v[depth], model.head.V, Transpose::Yes, dz, Transpose::No);
    }

    for (std::size_t i = depth; i >= 1; --i) {
      grad_h = carry[i - 1];
      if (passes_block_input(cfg, masks, t, i)) {
        const std::size_t source = cfg.block_first(cfg.block_of(i)) - 1;
        if (source >= 1) kernels::axpy(grad_v[source], grad_v[i]);
      } else {
        kernels::axpy(grad_h, grad_v[i]);
      }
      if (options.observer) options.observer(i, t, grad_h);

      if (pre[i - 1].empty()) {
        // Frozen: h_i(t) = h_i(t-1).
        carry[i - 1] = grad_h;
        continue;
      }

      const LayerParams& p = model.layer(i);
      LayerParams& gp = g.layers[i - 1];
      grad_pre = grad_h;
      multiply_by_derivative(cfg.activation, pre[i - 1], grad_pre);

      const Tensor2D& h_prev = t == 1 ? cache.initial[i - 1] : cache.hidden[t - 2][i - 1];
      const Tensor2D* rmask = masks.recurrent_mask(i);
      const Tensor2D* bmask = masks.between_mask(t, i);

      kernels::gemm_accumulate(gp.W, grad_pre, Transpose::No, masked(h_prev, rmask, scratch),
                               Transpose::Yes);
      kernels::gemm_accumulate(gp.U, grad_pre, Transpose::No,
                               masked(*vertical[i - 1], bmask, scratch2), Transpose::Yes);
      kernels::accumulate_row_sums(gp.b, grad_pre);

      Tensor2D& next_carry = carry[i - 1];
      next_carry.fill(0.0);
      kernels::gemm_accumulate(next_carry, p.W, Transpose::Yes, grad_pre, Transpose::No);
      if (rmask != nullptr) kernels::hadamard_inplace(next_carry, *rmask);

      if (i >= 2) {
        if (bmask != nullptr) {
          scratch = Tensor2D(cfg.width, batch);
          kernels::gemm_accumulate(scratch, p.U, Transpose::Yes, grad_pre, Transpose::No);
          kernels::hadamard_inplace(scratch, *bmask);
          kernels::axpy(grad_v[i - 1], scratch);
        } else {
          kernels::gemm_accumulate(grad_v[i - 1], p.U, Transpose::Yes, grad_pre, Transpose::No);
        }
      }
      if (cfg.has_skip(i) && i > cfg.skip_period) {
        kernels::axpy(grad_v[i - cfg.skip_period], grad_h, cfg.skip_scale);
      }
    }
  }

  for (const auto& lp : g.layers) {
    if (!all_finite(lp.W.values()) || !all_finite(lp.U.values()) || !all_finite(lp.b.values())) {
      throw DivergenceError("divergence: non-finite gradient", 0, 0);
    }
  }
  if (!all_finite(g.V.values()) || !all_finite(g.c.values())) {
    throw DivergenceError("divergence: non-finite head gradient", 0, 0);
  }
  return g;
}

}  // namespace bprnn
