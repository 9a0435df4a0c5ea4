#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bprnn/config.hpp"
#include "bprnn/stack.hpp"
#include "bprnn/trainer.hpp"

namespace bprnn {

// Layout (all integers little-endian):
//   "BPRN" | u32 version | u64 metadata length | JSON metadata | f64 payload
// The metadata holds the architecture, vocabulary, optional run config and
// training progress, and a manifest {name, rows, cols, offset} of the tensors
// stored back to back in the payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "BPRN";

struct Checkpoint {
  Model model;
  std::vector<std::uint8_t> vocab;
  std::optional<RunConfig> config;
  std::optional<TrainProgress> progress;  // present for training checkpoints, with Adam moments
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

// Writes through a temporary file in the same directory, then renames.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws IoError when unreadable and a FormatError subclass when malformed:
// BadMagicError, UnsupportedVersionError, PayloadLengthError, MetadataError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bprnn
