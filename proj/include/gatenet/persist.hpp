#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gatenet/model.hpp"

namespace gatenet {

// Checkpoint layout (all integers little-endian):
//   "GNC1" | u32 header_len | header_len bytes of UTF-8 JSON | payload
// The JSON header carries format_version, kind ("base" or "gates"),
// layer_sizes, class_names, categories, then norm_stats (base) or task and
// base_digest (gates), then a tensor manifest of {name, shape, offset,
// length}. The payload is every tensor, in manifest order, as binary32.

inline constexpr int kCheckpointFormatVersion = 1;

std::vector<std::uint8_t> save_base(const BaseModel& model);
BaseModel load_base(std::span<const std::uint8_t> bytes);

/// A gate checkpoint repeats the base's layer sizes and taxonomy so it can
/// be inspected on its own.
struct GateCheckpoint
{
    GateSet gates;
    std::vector<Eigen::Index> layer_sizes;
    Taxonomy taxonomy;
};

std::vector<std::uint8_t> save_gates(const GateSet& gates, const BaseModel& base);
GateCheckpoint load_gates(std::span<const std::uint8_t> bytes);

/// Builds the gate bank used for cued evaluation. Every checkpoint must
/// record the digest of `base`; tasks are ordered as in the taxonomy.
GateBank<float> pair_gates(const BaseModel& base, std::span<const GateCheckpoint> checkpoints);

std::string digest_hex(std::uint64_t digest);

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gatenet
