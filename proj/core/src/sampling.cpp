#include "splinediff/sampling.hpp"

#include <algorithm>

namespace splinediff {

TensorF sample_video(Denoiser<float>& model, const NoiseSchedule& sched,
                     const ConditionBundle<float>& cond, Rng& rng, const LatentCodec& codec) {
  const ModelDims& d = model.dims();
  TensorF z = gaussian_sample<float>(
      rng, {static_cast<std::size_t>(d.frames), 1, static_cast<std::size_t>(d.height),
            static_cast<std::size_t>(d.width)});
  DenoiserTrace<float> trace;
  for (int t = sched.steps; t >= 1; --t) {
    TensorF eps = model.predict_noise(z, cond, t, trace);
    z = denoise_step(sched, eps, z, t, rng);
  }
  TensorF x = codec.decode(z);
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = std::clamp(x[i], 0.0f, 1.0f);
  return x;
}

}  // namespace splinediff
