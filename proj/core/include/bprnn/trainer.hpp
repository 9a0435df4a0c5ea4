#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bprnn/adam.hpp"
#include "bprnn/corpus.hpp"
#include "bprnn/dropout.hpp"
#include "bprnn/lsuv.hpp"
#include "bprnn/stack.hpp"

namespace bprnn {

struct InitConfig {
  LsuvConfig lsuv;
  double gamma = 0.5;  // gamma_rebalance after LSUV; 0.5 leaves W and U as they are
  PreInit pre_init = PreInit::Gaussian;

  friend bool operator==(const InitConfig&, const InitConfig&) = default;
};

// Pre-init, recurrent LSUV, then gamma rebalancing.
Model initialize_model(const StackConfig& stack, const InitConfig& init, Rng& rng,
                       std::vector<LsuvLayerReport>* reports = nullptr);

struct TrainConfig {
  StackConfig stack;
  DropoutConfig dropout;
  InitConfig init;
  double lr = 2e-4;
  std::size_t batch_size = 128;
  std::size_t seq_len = 50;
  std::size_t val_every_epochs = 4;
  double lr_decay_factor = 0.5;
  std::size_t max_epochs = 10;
  // Validation "improves" only when it beats the best so far by more than this (BPC).
  double improvement_tolerance = 1e-4;
  std::uint64_t seed = 42;

  void validate() const;
};

// lr * decay^decays, computed directly rather than by repeated halving.
double scheduled_learning_rate(const TrainConfig& cfg, std::size_t decays);

struct TrainLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps taken so far
  std::optional<double> train_bpc;
  std::optional<double> val_bpc;
  double lr = 0.0;  // learning rate used during this epoch
  bool dnc = false;
};

// Everything needed to continue a run.
struct TrainProgress {
  std::size_t epoch = 0;  // last completed epoch
  std::size_t step = 0;
  std::size_t lr_decays = 0;
  std::optional<double> best_val_bpc;
  AdamState adam;
};

struct TrainHooks {
  std::function<void(const Model&, const TrainProgress&)> on_new_best;
  std::function<void(const TrainLogRow&)> on_epoch;
};

struct TrainResult {
  Model model;
  TrainProgress progress;
  std::vector<TrainLogRow> log;
  std::vector<LsuvLayerReport> lsuv;  // empty when resumed
  bool diverged = false;
  std::string divergence_reason;
};

struct ResumeState {
  Model model;
  TrainProgress progress;
};

// Each epoch takes a uniformly random crop of the training text that splits
// into whole (batch_size x seq_len) batches, runs BPTT + Adam over it with
// hidden state carried between consecutive batches (reset every epoch), and
// every val_every_epochs epochs evaluates validation BPC, halving the
// learning rate (lr_decay_factor) when it does not improve. Divergence ends
// the run with a DNC row instead of throwing.
TrainResult train(const TrainConfig& cfg, const Corpus& corpus, const TrainHooks& hooks = {},
                  std::optional<ResumeState> resume = std::nullopt);

// Bits per character over `stream` in evaluation mode (no dropout), batch 1,
// hidden state threaded through the whole stream.
double evaluate(const Model& model, std::span<const int> stream);

// Start of the epoch's random crop.
std::size_t choose_crop_offset(std::size_t n, std::size_t batch, std::size_t seq_len, Rng& rng);

// CSV: epoch,step,train_bpc,val_bpc,lr (val_bpc empty when not measured,
// DNC in the metric columns for a diverged run).
void write_train_csv(std::ostream& out, const std::vector<TrainLogRow>& log);

}  // namespace bprnn
