#include "bprnn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "bprnn/errors.hpp"
#include "bprnn/random.hpp"

namespace bprnn {

SplitSpec SplitSpec::from_counts(std::size_t train, std::size_t val, std::size_t test) {
  SplitSpec s;
  s.kind = Kind::Counts;
  s.counts = {train, val, test};
  return s;
}

SplitSpec SplitSpec::from_files(std::filesystem::path train, std::filesystem::path val,
                                std::filesystem::path test) {
  SplitSpec s;
  s.kind = Kind::Files;
  s.files = {std::move(train), std::move(val), std::move(test)};
  return s;
}

void SplitSpec::validate() const {
  if (kind == Kind::Fractions) {
    double sum = 0.0;
    for (double f : fractions) {
      if (!(f >= 0.0 && f <= 1.0)) {
        throw ConfigError(fmt::format("split fraction {} outside [0, 1]", f));
      }
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError(fmt::format("split fractions sum to {}, expected 1", sum));
    }
  }
}

std::vector<std::uint8_t> build_vocabulary(std::string_view text) {
  std::array<bool, 256> seen{};
  for (char ch : text) seen[static_cast<unsigned char>(ch)] = true;
  std::vector<std::uint8_t> vocab;
  for (std::size_t b = 0; b < seen.size(); ++b) {
    if (seen[b]) vocab.push_back(static_cast<std::uint8_t>(b));
  }
  return vocab;
}

std::vector<int> encode(std::string_view text, std::span<const std::uint8_t> vocab) {
  std::array<int, 256> index;
  index.fill(-1);
  for (std::size_t i = 0; i < vocab.size(); ++i) index[vocab[i]] = static_cast<int>(i);
  std::vector<int> ids;
  ids.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size(); ++pos) {
    const auto byte = static_cast<unsigned char>(text[pos]);
    const int id = index[byte];
    if (id < 0) {
      throw VocabularyError(
          fmt::format("byte 0x{:02x} at offset {} is not in the vocabulary", byte, pos));
    }
    ids.push_back(id);
  }
  return ids;
}

std::string decode(std::span<const int> ids, std::span<const std::uint8_t> vocab) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      throw VocabularyError(fmt::format("symbol id {} outside vocabulary", id));
    }
    out.push_back(static_cast<char>(vocab[static_cast<std::size_t>(id)]));
  }
  return out;
}

namespace {

Corpus assemble(std::string_view train, std::string_view val, std::string_view test,
                std::optional<std::span<const std::uint8_t>> vocab) {
  Corpus c;
  if (vocab) {
    c.vocab.assign(vocab->begin(), vocab->end());
  } else {
    std::string all;
    all.reserve(train.size() + val.size() + test.size());
    all.append(train).append(val).append(test);
    c.vocab = build_vocabulary(all);
  }
  c.symbols = encode(train, c.vocab);
  c.train_end = c.symbols.size();
  const auto v = encode(val, c.vocab);
  c.symbols.insert(c.symbols.end(), v.begin(), v.end());
  c.val_end = c.symbols.size();
  const auto t = encode(test, c.vocab);
  c.symbols.insert(c.symbols.end(), t.begin(), t.end());
  return c;
}

}  // namespace

Corpus make_corpus(std::string_view text, const SplitSpec& split,
                   std::optional<std::span<const std::uint8_t>> vocab) {
  split.validate();
  if (text.empty()) throw IngestionError("corpus is empty");
  const std::size_t n = text.size();
  std::size_t train = 0;
  std::size_t val = 0;
  switch (split.kind) {
    case SplitSpec::Kind::Fractions:
      train = static_cast<std::size_t>(std::floor(split.fractions[0] * static_cast<double>(n)));
      val = static_cast<std::size_t>(
                std::floor((split.fractions[0] + split.fractions[1]) * static_cast<double>(n))) -
            train;
      val = std::min(val, n - train);
      break;
    case SplitSpec::Kind::Counts:
      if (split.counts[0] + split.counts[1] + split.counts[2] != n) {
        throw ConfigError(fmt::format("split counts {}+{}+{} do not add up to {} symbols",
                                      split.counts[0], split.counts[1], split.counts[2], n));
      }
      train = split.counts[0];
      val = split.counts[1];
      break;
    case SplitSpec::Kind::Files:
      throw ConfigError("make_corpus: file splits need ingest()");
  }
  return assemble(text.substr(0, train), text.substr(train, val), text.substr(train + val),
                  vocab);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IngestionError(fmt::format("error reading '{}'", path.string()));
  return std::move(ss).str();
}

Corpus ingest(const std::filesystem::path& path, const SplitSpec& split,
              std::optional<std::span<const std::uint8_t>> vocab) {
  split.validate();
  if (split.kind == SplitSpec::Kind::Files) {
    const std::string train = read_file(split.files[0]);
    const std::string val = read_file(split.files[1]);
    const std::string test = read_file(split.files[2]);
    if (train.empty()) {
      throw IngestionError(fmt::format("'{}' is empty", split.files[0].string()));
    }
    return assemble(train, val, test, vocab);
  }
  const std::string text = read_file(path);
  if (text.empty()) throw IngestionError(fmt::format("'{}' is empty", path.string()));
  return make_corpus(text, split, vocab);
}

namespace {

struct WordClass {
  std::vector<std::string_view> words;
  std::vector<double> cumulative;  // Zipf weights 1/(rank+1)
};

WordClass make_class(std::initializer_list<std::string_view> words) {
  WordClass c{std::vector<std::string_view>(words), {}};
  double total = 0.0;
  for (std::size_t r = 0; r < c.words.size(); ++r) {
    total += 1.0 / static_cast<double>(r + 1);
    c.cumulative.push_back(total);
  }
  for (double& x : c.cumulative) x /= total;
  return c;
}

std::string_view pick(const WordClass& c, Rng& rng) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(c.cumulative.begin(), c.cumulative.end(), u);
  const auto idx = static_cast<std::size_t>(std::distance(c.cumulative.begin(), it));
  return c.words[std::min(idx, c.words.size() - 1)];
}

class SentenceWriter {
 public:
  explicit SentenceWriter(Rng& rng) : rng_(rng) {}

  std::string sentence() {
    words_.clear();
    clause();
    if (rng_.bernoulli(0.3)) {
      words_.back().push_back(',');
      words_.emplace_back(pick(conjunctions_, rng_));
      clause();
    }
    std::string out;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (i > 0) out.push_back(' ');
      out += words_[i];
    }
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    out.push_back('.');
    return out;
  }

 private:
  void noun_phrase() {
    words_.emplace_back(pick(determiners_, rng_));
    if (rng_.bernoulli(0.4)) words_.emplace_back(pick(adjectives_, rng_));
    words_.emplace_back(pick(nouns_, rng_));
    if (rng_.bernoulli(0.2)) {
      words_.emplace_back(pick(prepositions_, rng_));
      words_.emplace_back(pick(determiners_, rng_));
      words_.emplace_back(pick(nouns_, rng_));
    }
  }

  void clause() {
    noun_phrase();
    words_.emplace_back(pick(verbs_, rng_));
    if (rng_.bernoulli(0.7)) noun_phrase();
    if (rng_.bernoulli(0.25)) words_.emplace_back(pick(adverbs_, rng_));
  }

  Rng& rng_;
  std::vector<std::string> words_;
  WordClass determiners_ = make_class(
      {"the", "a", "this", "every", "some", "that", "one", "no", "each", "another", "her", "his",
       "their", "our", "its"});
  WordClass adjectives_ = make_class(
      {"small", "old", "new", "large", "quiet", "early", "long", "bright", "heavy", "simple",
       "strange", "young", "cold", "private", "recent", "local", "happy", "wooden", "narrow",
       "distant", "green", "careful", "formal", "broken", "silent", "modern", "warm", "ancient"});
  WordClass nouns_ = make_class(
      {"man", "market", "company", "house", "year", "city", "river", "child", "report", "world",
       "government", "teacher", "story", "road", "letter", "village", "price", "morning", "door",
       "window", "question", "garden", "station", "machine", "student", "country", "paper",
       "bank", "night", "friend", "mountain", "office", "book", "table", "family", "voice",
       "system", "water", "president", "share", "bridge", "picture", "week", "engine", "ship",
       "island", "winter", "doctor", "song", "forest"});
  WordClass verbs_ = make_class(
      {"saw", "found", "said", "took", "made", "left", "held", "bought", "sold", "opened",
       "closed", "watched", "reported", "followed", "carried", "wanted", "needed", "reached",
       "raised", "lost", "built", "crossed", "remembered", "described", "visited", "expected",
       "changed", "moved", "joined", "answered"});
  WordClass adverbs_ = make_class({"again", "slowly", "today", "there", "quickly", "yesterday",
                                   "together", "later", "at last", "once more", "quietly"});
  WordClass prepositions_ =
      make_class({"of", "in", "near", "from", "with", "behind", "under", "across", "beside"});
  WordClass conjunctions_ = make_class({"and", "but", "so", "while", "because", "although"});
};

}  // namespace

std::string synthetic_text(std::size_t bytes, std::uint64_t seed) {
  Rng rng(seed);
  SentenceWriter writer(rng);
  std::string out;
  out.reserve(bytes + 256);
  std::size_t in_paragraph = 0;
  while (out.size() < bytes) {
    if (in_paragraph > 0) out.push_back(' ');
    out += writer.sentence();
    ++in_paragraph;
    if (in_paragraph >= 4 + rng.below(6)) {
      out.push_back('\n');
      in_paragraph = 0;
    }
  }
  out.resize(bytes);
  return out;
}

}  // namespace bprnn
