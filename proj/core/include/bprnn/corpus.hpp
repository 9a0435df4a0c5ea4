#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bprnn {

// How a corpus is divided into train / validation / test.
struct SplitSpec {
  enum class Kind {
    Fractions,  // leading fractions of the text, e.g. 0.9 / 0.05 / 0.05
    Counts,     // exact symbol counts, must add up to the text length
    Files,      // three separate files
  };
  Kind kind = Kind::Fractions;
  std::array<double, 3> fractions{0.9, 0.05, 0.05};
  std::array<std::size_t, 3> counts{0, 0, 0};
  std::array<std::filesystem::path, 3> files;

  static SplitSpec text8() { return {}; }
  static SplitSpec from_counts(std::size_t train, std::size_t val, std::size_t test);
  static SplitSpec from_files(std::filesystem::path train, std::filesystem::path val,
                              std::filesystem::path test);

  void validate() const;
};

// Byte-level corpus. The vocabulary is the sorted set of distinct byte values
// and a symbol id is a position in it.
struct Corpus {
  std::vector<int> symbols;
  std::vector<std::uint8_t> vocab;
  std::size_t train_end = 0;  // symbols[0, train_end) is training text
  std::size_t val_end = 0;    // symbols[train_end, val_end) is validation text

  [[nodiscard]] std::size_t vocab_size() const noexcept { return vocab.size(); }
  [[nodiscard]] std::span<const int> train() const noexcept {
    return std::span<const int>(symbols).subspan(0, train_end);
  }
  [[nodiscard]] std::span<const int> validation() const noexcept {
    return std::span<const int>(symbols).subspan(train_end, val_end - train_end);
  }
  [[nodiscard]] std::span<const int> test() const noexcept {
    return std::span<const int>(symbols).subspan(val_end);
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Sorted distinct bytes of `text`.
std::vector<std::uint8_t> build_vocabulary(std::string_view text);
// Maps bytes to ids; throws VocabularyError on a byte outside `vocab`.
std::vector<int> encode(std::string_view text, std::span<const std::uint8_t> vocab);
std::string decode(std::span<const int> ids, std::span<const std::uint8_t> vocab);

// Builds a corpus from in-memory text. With `vocab` given, ids follow it
// instead of a vocabulary built from the text.
Corpus make_corpus(std::string_view text, const SplitSpec& split,
                   std::optional<std::span<const std::uint8_t>> vocab = std::nullopt);

// Reads `path` (ignored for SplitSpec::Kind::Files) and splits it.
// Throws IngestionError for unreadable or empty input, ConfigError for a bad split.
Corpus ingest(const std::filesystem::path& path, const SplitSpec& split,
              std::optional<std::span<const std::uint8_t>> vocab = std::nullopt);

std::string read_file(const std::filesystem::path& path);

// Deterministic English-like prose (sentences from a small grammar with
// Zipf-weighted word choice), exactly `bytes` long. Stand-in corpus for tests
// and benchmarks where Penn Treebank / Text8 cannot be redistributed.
std::string synthetic_text(std::size_t bytes, std::uint64_t seed);

}  // namespace bprnn
