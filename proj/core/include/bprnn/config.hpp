#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "bprnn/corpus.hpp"
#include "bprnn/dynamics.hpp"
#include "bprnn/trainer.hpp"

namespace bprnn {

enum class SplitName { Train, Validation, Test };

SplitName parse_split_name(std::string_view name);
std::string_view split_name(SplitName s) noexcept;
std::span<const int> select_split(const Corpus& corpus, SplitName s);

struct ProbeConfig {
  std::size_t batch_size = 32;
  std::size_t seq_len = 50;
  std::size_t batches = 10;
  SplitName split = SplitName::Test;
  double learning_rate = 2e-4;  // Adam step between probe batches; 0 freezes the model

  friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

// One JSON document drives every subcommand:
//
//   {
//     "seed": 42,
//     "model":    {"depth", "width", "activation", "skip_connections", "skip_period",
//                  "skip_scale", "embedding_dim", "vocab_size"},
//     "init":     {"target_variance", "tolerance", "max_iterations", "probe_batch",
//                  "measure_before_skip", "update", "gamma", "pre_init"},
//     "dropout":  {"p_between", "p_recurrent", "p_block", "block_identity", "block_freeze"},
//     "train":    {"lr", "batch_size", "seq_len", "val_every_epochs", "lr_decay_factor",
//                  "max_epochs", "improvement_tolerance"},
//     "data":     {"fractions": [..3]} | {"counts": [..3]} | {"files": [..3]},
//     "dynamics": {"width", "iterations", "runs", "activation"},
//     "probe":    {"batch_size", "seq_len", "batches", "split", "learning_rate"}
//   }
//
// Every section and key is optional. An activation is either a short name
// ("belu") or {"base", "bipolar", "alpha", "slope", "lambda"}. Unknown keys
// and wrongly typed values raise ConfigError.
struct RunConfig {
  TrainConfig train;  // carries model, init and dropout sections too
  SplitSpec split;
  DynamicsConfig dynamics;
  ProbeConfig probe;
  bool seed_given = false;  // "seed" present in the document

  // Dynamics LSUV follows the "init" section.
  [[nodiscard]] DynamicsConfig dynamics_config() const;
  void set_seed(std::uint64_t seed);
};

inline constexpr std::size_t kDefaultVocabSize = 27;

RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical JSON (sorted keys, shortest round-trip numbers). parse_config of
// the result gives back an equal configuration.
std::string dump_config(const RunConfig& cfg, int indent = 2);

// JSON fragments used by the checkpoint metadata.
std::string dump_stack_config(const StackConfig& stack);
StackConfig parse_stack_config(std::string_view json_text);

}  // namespace bprnn
