#pragma once

#include "splinediff/synthdata.hpp"
#include "splinediff/training.hpp"

namespace splinediff::testing {

inline ModelDims tiny_dims(bool use_asd = true, bool use_pda = true) {
  ModelDims d;
  d.frames = 4;
  d.height = 8;
  d.width = 8;
  d.channels = 8;
  d.blocks = 2;
  d.time_dim = 16;
  d.style_dim = 4;
  d.depth_mid = 4;
  d.style_mid = 4;
  d.use_asd = use_asd;
  d.use_pda = use_pda;
  return d;
}

inline TrainingData tiny_corpus(const ModelDims& dims, std::size_t n_train = 6,
                                std::size_t n_eval = 2, std::uint64_t seed = 7) {
  ClipGeometry geom{dims.frames, dims.height, dims.width};
  Rng rng(seed);
  std::vector<Clip> clips;
  std::vector<TensorF> videos;
  for (std::size_t i = 0; i < n_train + n_eval; ++i) {
    Rng clip_rng = rng.fork(i);
    TubeParams params = draw_tube_params(clip_rng);
    // shrink the path to the smaller canvas
    params.amplitude *= dims.width / 16.0;
    params.radius *= dims.width / 16.0;
    clips.push_back(generate_clip(params, geom));
    if (i < n_train) videos.push_back(clips.back().video);
  }
  TrainingData data;
  data.codec = LatentCodec::fit(videos);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    TrainClip tc;
    tc.z0 = data.codec.encode(clips[i].video);
    tc.depth = clips[i].depth;
    const std::size_t hw = clips[i].video.extent(2) * clips[i].video.extent(3);
    tc.first_frame =
        TensorF({1, clips[i].video.extent(2), clips[i].video.extent(3)},
                std::vector<float>(clips[i].video.data(), clips[i].video.data() + hw));
    (i < n_train ? data.train : data.eval).push_back(std::move(tc));
  }
  return data;
}

}  // namespace splinediff::testing
