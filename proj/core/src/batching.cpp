#include "bprnn/batching.hpp"

#include <fmt/format.h>

#include "bprnn/errors.hpp"

namespace bprnn {

std::size_t crop_slack(std::size_t n, std::size_t batch, std::size_t seq_len) {
  const std::size_t block = batch * seq_len;
  if (block == 0) throw ConfigError("batch size and sequence length must be positive");
  if (n < block + 1) {
    throw ConfigError(fmt::format(
        "text of {} symbols is too short for one {}x{} batch (needs {})", n, batch, seq_len,
        block + 1));
  }
  const std::size_t usable = ((n - 1) / block) * block;
  return n - 1 - usable;
}

SequenceBatches::SequenceBatches(std::span<const int> text, std::size_t offset, std::size_t batch,
                                 std::size_t seq_len)
    : text_(text), offset_(offset), batch_(batch), seq_len_(seq_len) {
  if (offset > text.size()) throw ParameterError("SequenceBatches: offset past end of text");
  const std::size_t available = text.size() - offset;
  const std::size_t block = batch * seq_len;
  if (block == 0 || available < block + 1) {
    throw ConfigError(fmt::format("text of {} symbols (offset {}) is too short for a {}x{} batch",
                                  text.size(), offset, batch, seq_len));
  }
  count_ = (available - 1) / block;
  stream_len_ = count_ * seq_len;
}

std::pair<TokenGrid, TokenGrid> SequenceBatches::get(std::size_t k) const {
  if (k >= count_) throw ParameterError(fmt::format("batch {} of {} requested", k, count_));
  TokenGrid inputs(seq_len_, batch_);
  TokenGrid targets(seq_len_, batch_);
  for (std::size_t b = 0; b < batch_; ++b) {
    const std::size_t start = offset_ + b * stream_len_ + k * seq_len_;
    for (std::size_t t = 0; t < seq_len_; ++t) {
      inputs.at(t, b) = text_[start + t];
      targets.at(t, b) = text_[start + t + 1];
    }
  }
  return {std::move(inputs), std::move(targets)};
}

}  // namespace bprnn
