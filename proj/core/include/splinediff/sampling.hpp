#pragma once

#include "splinediff/denoiser.hpp"
#include "splinediff/diffusion.hpp"

namespace splinediff {

/// Ancestral sampling from pure noise, decoded through the codec and clipped
/// to [0,1]. Callers pass the EMA snapshot of the model.
TensorF sample_video(Denoiser<float>& model, const NoiseSchedule& sched,
                     const ConditionBundle<float>& cond, Rng& rng, const LatentCodec& codec);

}  // namespace splinediff
