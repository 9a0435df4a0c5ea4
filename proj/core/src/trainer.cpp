#include "bprnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "bprnn/batching.hpp"
#include "bprnn/errors.hpp"
#include "bprnn/rnn.hpp"

namespace bprnn {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::size_t kEvalChunk = 256;

std::string format_metric(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

}  // namespace

Model initialize_model(const StackConfig& stack, const InitConfig& init, Rng& rng,
                       std::vector<LsuvLayerReport>* reports) {
  Model model = make_model(stack, rng, init.pre_init);
  auto r = lsuv_init_stack(model, init.lsuv, rng);
  gamma_rebalance(model, init.gamma);
  if (reports != nullptr) *reports = std::move(r);
  return model;
}

void TrainConfig::validate() const {
  stack.validate();
  dropout.validate();
  init.lsuv.validate();
  if (!(init.gamma >= 0.0 && init.gamma <= 1.0)) {
    throw ConfigError(fmt::format("gamma {} outside [0, 1]", init.gamma));
  }
  if (!(lr > 0.0)) throw ConfigError(fmt::format("learning rate must be positive, got {}", lr));
  if (batch_size == 0 || seq_len == 0 || val_every_epochs == 0) {
    throw ConfigError("batch_size, seq_len and val_every_epochs must be positive");
  }
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
    throw ConfigError(fmt::format("lr_decay_factor {} outside (0, 1)", lr_decay_factor));
  }
  if (!(improvement_tolerance >= 0.0)) throw ConfigError("improvement_tolerance must be >= 0");
}

double scheduled_learning_rate(const TrainConfig& cfg, std::size_t decays) {
  return cfg.lr * std::pow(cfg.lr_decay_factor, static_cast<double>(decays));
}

std::size_t choose_crop_offset(std::size_t n, std::size_t batch, std::size_t seq_len, Rng& rng) {
  return rng.below(crop_slack(n, batch, seq_len) + 1);
}

double evaluate(const Model& model, std::span<const int> stream) {
  if (stream.size() < 2) throw ParameterError("evaluate: stream needs at least two symbols");
  const DropoutMasks none = DropoutMasks::none();
  StackState state = zero_state(model.config, 1);
  double total = 0.0;
  std::size_t count = 0;
  const std::size_t predictions = stream.size() - 1;
  for (std::size_t start = 0; start < predictions; start += kEvalChunk) {
    const std::size_t len = std::min(kEvalChunk, predictions - start);
    TokenGrid inputs(len, 1, std::vector<int>(stream.begin() + start, stream.begin() + start + len));
    TokenGrid targets(len, 1,
                      std::vector<int>(stream.begin() + start + 1, stream.begin() + start + len + 1));
    SequenceResult r = forward_sequence(model, state, inputs, targets, none, /*keep_cache=*/false);
    total += r.loss_sum;
    count += r.count;
    state = std::move(r.final_state);
  }
  return cross_entropy_to_bpc(total / static_cast<double>(count));
}

TrainResult train(const TrainConfig& base_cfg, const Corpus& corpus, const TrainHooks& hooks,
                  std::optional<ResumeState> resume) {
  TrainConfig cfg = base_cfg;
  cfg.stack.vocab_size = corpus.vocab_size();
  cfg.validate();
  const Rng root(cfg.seed);

  TrainResult result;
  if (resume) {
    if (resume->model.config != cfg.stack) {
      throw ConfigError("resume: checkpoint architecture differs from the configured stack");
    }
    result.model = std::move(resume->model);
    result.progress = std::move(resume->progress);
  } else {
    Rng init_rng = root.split(kInitStream);
    result.model = initialize_model(cfg.stack, cfg.init, init_rng, &result.lsuv);
    result.progress.adam = make_adam_state(result.model);
  }
  Model& model = result.model;
  TrainProgress& progress = result.progress;

  const auto train_text = corpus.train();
  if (cfg.max_epochs > progress.epoch) {
    crop_slack(train_text.size(), cfg.batch_size, cfg.seq_len);  // fail early on short text
  }

  while (progress.epoch < cfg.max_epochs) {
    const std::size_t epoch = progress.epoch + 1;
    Rng rng = root.split(epoch);
    const double lr = scheduled_learning_rate(cfg, progress.lr_decays);
    TrainLogRow row;
    row.epoch = epoch;
    row.lr = lr;
    try {
      const std::size_t offset =
          choose_crop_offset(train_text.size(), cfg.batch_size, cfg.seq_len, rng);
      const SequenceBatches batches(train_text, offset, cfg.batch_size, cfg.seq_len);
      StackState state = zero_state(cfg.stack, cfg.batch_size);
      double loss_sum = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < batches.count(); ++k) {
        const auto [inputs, targets] = batches.get(k);
        const DropoutMasks masks =
            sample_masks(cfg.dropout, cfg.stack, cfg.seq_len, cfg.batch_size, rng);
        SequenceResult fwd = forward_sequence(model, state, inputs, targets, masks);
        const Gradients grads = backward(fwd.cache, model, masks);
        adam_update(model, grads, progress.adam, lr);
        loss_sum += fwd.loss_sum;
        count += fwd.count;
        ++progress.step;
        state = std::move(fwd.final_state);
      }
      row.step = progress.step;
      row.train_bpc = cross_entropy_to_bpc(loss_sum / static_cast<double>(count));

      if (epoch % cfg.val_every_epochs == 0 && corpus.validation().size() >= 2) {
        const double val = evaluate(model, corpus.validation());
        row.val_bpc = val;
        if (!progress.best_val_bpc || val < *progress.best_val_bpc - cfg.improvement_tolerance) {
          progress.best_val_bpc = val;
          progress.epoch = epoch;
          if (hooks.on_new_best) hooks.on_new_best(model, progress);
        } else {
          ++progress.lr_decays;
        }
      }
    } catch (const DivergenceError& e) {
      row.step = progress.step;
      row.dnc = true;
      row.train_bpc.reset();
      row.val_bpc.reset();
      result.log.push_back(row);
      result.diverged = true;
      result.divergence_reason = e.what();
      if (hooks.on_epoch) hooks.on_epoch(row);
      return result;
    }
    progress.epoch = epoch;
    result.log.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
  }
  return result;
}

void write_train_csv(std::ostream& out, const std::vector<TrainLogRow>& log) {
  out << "epoch,step,train_bpc,val_bpc,lr\n";
  for (const auto& r : log) {
    if (r.dnc) {
      out << fmt::format("{},{},DNC,DNC,{}\n", r.epoch, r.step, r.lr);
    } else {
      out << fmt::format("{},{},{},{},{}\n", r.epoch, r.step, format_metric(r.train_bpc),
                         format_metric(r.val_bpc), r.lr);
    }
  }
}

}  // namespace bprnn
