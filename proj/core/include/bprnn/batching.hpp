#pragma once

#include <cstddef>
#include <span>
#include <utility>

#include "bprnn/rnn.hpp"

namespace bprnn {

// Lays a symbol stream out as `batch` contiguous parallel streams cut into
// non-overlapping sequences of `seq_len` steps. Batch k holds positions
// [k * seq_len, (k + 1) * seq_len) of every stream, so hidden state can be
// carried from batch k to batch k + 1.
class SequenceBatches {
 public:
  // Uses text[offset, offset + count() * batch * seq_len + 1).
  SequenceBatches(std::span<const int> text, std::size_t offset, std::size_t batch,
                  std::size_t seq_len);

  [[nodiscard]] std::size_t count() const noexcept { return count_; }
  [[nodiscard]] std::size_t batch() const noexcept { return batch_; }
  [[nodiscard]] std::size_t seq_len() const noexcept { return seq_len_; }

  // (inputs, targets) for batch k, targets shifted one step ahead.
  [[nodiscard]] std::pair<TokenGrid, TokenGrid> get(std::size_t k) const;

 private:
  std::span<const int> text_;
  std::size_t offset_;
  std::size_t batch_;
  std::size_t seq_len_;
  std::size_t stream_len_;
  std::size_t count_;
};

// Number of leftover positions when a text of n symbols is cut into whole
// (batch x seq_len) blocks with one extra symbol for the final target. Valid
// random-crop offsets are 0 .. crop_slack(n, batch, seq_len) inclusive.
// Throws ConfigError when n is too short for a single batch.
std::size_t crop_slack(std::size_t n, std::size_t batch, std::size_t seq_len);

}  // namespace bprnn
