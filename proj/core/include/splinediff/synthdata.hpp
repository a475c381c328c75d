#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splinediff/rng.hpp"
#include "splinediff/tensor.hpp"

namespace splinediff {

struct ClipGeometry {
  int frames = 8;
  int height = 16;
  int width = 16;
};

/// Tube-flythrough parameters. The camera path orbits the image center with
/// amplitude/speed (A, omega); depth falls off radially from the path within
/// the lumen radius; intensity is a fixed function of depth plus texture and
/// noise.
struct TubeParams {
  double amplitude = 4.0;      // A (pixels)
  double angular_speed = 0.4;  // omega (radians/frame)
  double phase = 0.0;          // phi_0
  double radius = 5.0;         // lumen radius R (pixels)
  double shading_exp = 1.5;    // p
  double texture_amp = 0.08;   // b
  double noise_std = 0.02;     // s
  std::uint64_t seed = 0;
};

/// Depth convention: 1 = lumen center (far), 0 = near wall.
struct Clip {
  std::string id;
  TensorF video;  // [T,1,H,W] in [0,1]
  TensorF depth;  // [T,1,H,W] in [0,1]
  TubeParams params;
};

Clip generate_clip(const TubeParams& params, const ClipGeometry& geom = {});

struct ManifestEntry {
  std::string id;
  TubeParams params;
  std::string split;  // "train" | "eval"
};

struct Manifest {
  int schema_version = 1;
  std::uint64_t base_seed = 0;
  ClipGeometry geometry;
  std::vector<ManifestEntry> entries;
};

/// round-half-up(0.8 * n) clips go to the train split.
std::size_t train_split_count(std::size_t n);

/// Writes n clips as clip_{i}.video.dpt / clip_{i}.depth.dpt pairs plus
/// manifest.json; parameters are drawn from the documented ranges by a
/// seeded stream. Returns the manifest path.
std::string make_corpus(std::size_t n, std::uint64_t base_seed, const std::string& out_dir,
                        const ClipGeometry& geom = {});

Manifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const Manifest& manifest);

/// Reads a clip pair back, validating format and [0,1] ranges.
Clip read_clip(const std::string& video_path, const std::string& depth_path);

/// Draws TubeParams from the corpus ranges using the given stream.
TubeParams draw_tube_params(Rng& rng);

}  // namespace splinediff
