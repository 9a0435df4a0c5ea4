// Writes deterministic English-like text for smoke runs:
//   bprnn-synth-corpus BYTES OUT [--seed S]
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bprnn/corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic text corpus", "bprnn-synth-corpus"};
  std::size_t bytes = 0;
  std::string path;
  std::uint64_t seed = 42;
  app.add_option("bytes", bytes)->required()->check(CLI::PositiveNumber);
  app.add_option("out", path)->required();
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  const std::string text = bprnn::synthetic_text(bytes, seed);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    std::cerr << "error: io: cannot write " << path << "\n";
    return 3;
  }
  return 0;
}
