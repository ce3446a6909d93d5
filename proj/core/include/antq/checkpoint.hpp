#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "antq/parameters.hpp"

namespace antq {

// Flat binary parameter container, little-endian throughout:
//
//   "ANTQ" | version u32 | count u32
//   per parameter: name_len u16 | name bytes (UTF-8) | rank u8 | dims u32[rank]
//                  | values f32[prod(dims)] row-major
inline constexpr char kCheckpointMagic[4] = {'A', 'N', 'T', 'Q'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Narrows parameter values to f32 for storage.
std::vector<CheckpointEntry> to_entries(const ParameterList& params);

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

/// Copies stored values into matching parameters by name. Every parameter in
/// `params` must be present with an identical shape; extra entries in the
/// file are ignored (e.g. the stage-1 classifier head). Returns the number
/// of parameters filled.
std::size_t load_into(const std::vector<CheckpointEntry>& entries, const ParameterList& params);

/// Rounds every parameter to f32 precision in place, so that in-memory
/// values equal what a checkpoint round-trip reproduces.
void round_to_storage_precision(const ParameterList& params);

}  // namespace antq
