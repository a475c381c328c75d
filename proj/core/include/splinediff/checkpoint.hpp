#pragma once

#include <cstdint>
#include <string>

#include "splinediff/denoiser.hpp"
#include "splinediff/training.hpp"

namespace splinediff {

// DPCK checkpoint: magic "DPCK", u32 LE version, u64 LE header length, UTF-8
// JSON header (stage, step, config hash, named-tensor directory with offsets
// into the payload), then concatenated DPT1 tensor blobs.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint32_t version = kCheckpointVersion;
  Stage stage = Stage::Warmup;
  std::int64_t step = 0;
  std::int64_t stage_step = 0;
  std::string config_hash;
  std::string variant;
  ModelDims dims;
  bool has_ema = false;
};

void save_checkpoint(const std::string& path, const Denoiser<float>& model,
                     const TrainState& state, const LatentCodec& codec,
                     const std::string& config_hash, const std::string& variant);

/// Reads parameters, optimizer/EMA state, rng position, and eval history back
/// into a model/state pair built from the same dimensions.
CheckpointMeta load_checkpoint(const std::string& path, Denoiser<float>& model,
                               TrainState& state, LatentCodec& codec);

/// Header-only read (no model required).
CheckpointMeta read_checkpoint_meta(const std::string& path);

}  // namespace splinediff
