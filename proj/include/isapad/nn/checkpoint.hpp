#pragma once

#include <filesystem>

#include "isapad/nn/network.hpp"
#include "isapad/scoring.hpp"

namespace isapad::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (little endian): "ISPD", u32 version, u32 variant, f64 width,
/// f64 isam width, f64 w1, f64 w2, u64 seed, u32 tensor count, then per
/// tensor: u32 name length, name, u32 dtype (0 f32, 1 i64), u32 rank,
/// i64 dims, raw data. Parameters come before buffers.
void save_checkpoint(const std::filesystem::path& path, IsapadNet& net);

/// Rebuilds the network described by the header. CheckpointError on bad
/// magic, unknown version, or tensors that do not fit the topology.
IsapadNet load_checkpoint(const std::filesystem::path& path);

/// Scorer returning P(bonafide) per patch from a network in inference mode.
PatchScorer make_scorer(IsapadNet net, int batch = 16);

}  // namespace isapad::nn
