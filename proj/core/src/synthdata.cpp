#include "splinediff/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "splinediff/tensor_io.hpp"

namespace splinediff {

namespace {

using nlohmann::json;

void validate_params(const TubeParams& p) {
  const double vals[] = {p.amplitude, p.angular_speed, p.phase,      p.radius,
                         p.shading_exp, p.texture_amp,  p.noise_std};
  for (double v : vals) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidParams, "TubeParams: non-finite value");
  }
  if (!(p.radius > 0.0)) fail(ErrorCode::InvalidParams, "TubeParams: radius must be > 0");
  if (p.noise_std < 0.0) fail(ErrorCode::InvalidParams, "TubeParams: noise_std must be >= 0");
}

json params_to_json(const TubeParams& p) {
  return json{{"amplitude", p.amplitude},   {"angular_speed", p.angular_speed},
              {"phase", p.phase},           {"radius", p.radius},
              {"shading_exp", p.shading_exp}, {"texture_amp", p.texture_amp},
              {"noise_std", p.noise_std},   {"seed", p.seed}};
}

TubeParams params_from_json(const json& j) {
  TubeParams p;
  p.amplitude = j.at("amplitude");
  p.angular_speed = j.at("angular_speed");
  p.phase = j.at("phase");
  p.radius = j.at("radius");
  p.shading_exp = j.at("shading_exp");
  p.texture_amp = j.at("texture_amp");
  p.noise_std = j.at("noise_std");
  p.seed = j.at("seed");
  return p;
}

std::string clip_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "clip_%05zu", i);
  return buf;
}

void check_unit_range(const TensorF& t, ErrorCode code, const char* what) {
  for (std::size_t i = 0; i < t.numel(); ++i) {
    if (!(t[i] >= 0.0f && t[i] <= 1.0f)) {
      fail(code, std::string(what) + " value out of [0,1]");
    }
  }
}

}  // namespace

std::size_t train_split_count(std::size_t n) {
  return static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(n) + 0.5));
}

TubeParams draw_tube_params(Rng& rng) {
  TubeParams p;
  // Ranges chosen so clip appearances decorrelate across parameter draws
  // while each clip stays learnable at 16x16.
  p.amplitude = rng.uniform(3.0, 6.0);
  p.angular_speed = rng.uniform(0.1, 0.8);
  p.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  p.radius = rng.uniform(3.0, 6.0);
  p.shading_exp = rng.uniform(1.0, 2.0);
  p.texture_amp = rng.uniform(0.0, 0.15);
  p.noise_std = rng.uniform(0.0, 0.05);
  p.seed = rng.next_u64();
  return p;
}

Clip generate_clip(const TubeParams& params, const ClipGeometry& geom) {
  validate_params(params);
  const std::size_t tf = static_cast<std::size_t>(geom.frames);
  const std::size_t h = static_cast<std::size_t>(geom.height);
  const std::size_t w = static_cast<std::size_t>(geom.width);
  Clip clip;
  clip.params = params;
  clip.video = TensorF({tf, 1, h, w});
  clip.depth = TensorF({tf, 1, h, w});
  Rng noise(params.seed);
  const double cy0 = static_cast<double>(h) / 2.0;
  const double cx0 = static_cast<double>(w) / 2.0;
  for (std::size_t t = 0; t < tf; ++t) {
    const double angle = params.angular_speed * static_cast<double>(t) + params.phase;
    const double cy = cy0 + params.amplitude * std::sin(angle);
    const double cx = cx0 + params.amplitude * std::cos(angle);
    TensorF eta = gaussian_sample<float>(noise, {h * w});
    float* vid = clip.video.data() + t * h * w;
    float* dep = clip.depth.data() + t * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        const double dist = std::sqrt(dy * dy + dx * dx);
        const double depth = 1.0 - std::clamp(dist / params.radius, 0.0, 1.0);
        const double wall = 1.0 - depth;
        const double intensity =
            std::pow(wall, params.shading_exp) +
            params.texture_amp * std::sin(6.0 * std::numbers::pi * depth) +
            params.noise_std * static_cast<double>(eta[y * w + x]);
        dep[y * w + x] = static_cast<float>(depth);
        vid[y * w + x] = static_cast<float>(std::clamp(intensity, 0.0, 1.0));
      }
    }
  }
  return clip;
}

void write_manifest(const std::string& path, const Manifest& manifest) {
  json j;
  j["schema_version"] = manifest.schema_version;
  j["base_seed"] = std::to_string(manifest.base_seed);
  j["geometry"] = json{{"frames", manifest.geometry.frames},
                       {"height", manifest.geometry.height},
                       {"width", manifest.geometry.width}};
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back(json{{"id", e.id}, {"params", params_to_json(e.params)},
                           {"split", e.split}});
  }
  j["clips"] = entries;
  std::ofstream os(path, std::ios::trunc);
  if (!os) fail(ErrorCode::IoError, "cannot open for write: " + path);
  os << j.dump(2) << "\n";
  if (!os) fail(ErrorCode::IoError, "write failed: " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::IoError, "cannot open: " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::FormatError, "manifest: malformed JSON");
  Manifest m;
  m.schema_version = j.at("schema_version");
  if (m.schema_version != 1) {
    fail(ErrorCode::VersionMismatch, "manifest: unsupported schema_version");
  }
  m.base_seed = std::stoull(j.at("base_seed").get<std::string>());
  m.geometry.frames = j.at("geometry").at("frames");
  m.geometry.height = j.at("geometry").at("height");
  m.geometry.width = j.at("geometry").at("width");
  for (const auto& e : j.at("clips")) {
    m.entries.push_back(ManifestEntry{e.at("id").get<std::string>(),
                                      params_from_json(e.at("params")),
                                      e.at("split").get<std::string>()});
  }
  return m;
}

std::string make_corpus(std::size_t n, std::uint64_t base_seed, const std::string& out_dir,
                        const ClipGeometry& geom) {
  if (n < 1) fail(ErrorCode::InvalidParams, "make_corpus: n must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    fail(ErrorCode::IoError, "make_corpus: cannot create directory " + out_dir);
  }
  Rng corpus_rng(base_seed);
  Manifest manifest;
  manifest.base_seed = base_seed;
  manifest.geometry = geom;
  const std::size_t train_n = train_split_count(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng clip_rng = corpus_rng.fork(i);
    TubeParams params = draw_tube_params(clip_rng);
    Clip clip = generate_clip(params, geom);
    clip.id = clip_id(i);
    const std::string base = out_dir + "/" + clip.id;
    write_dpt(base + ".video.dpt", clip.video);
    write_dpt(base + ".depth.dpt", clip.depth);
    manifest.entries.push_back(
        ManifestEntry{clip.id, params, i < train_n ? "train" : "eval"});
  }
  const std::string manifest_path = out_dir + "/manifest.json";
  write_manifest(manifest_path, manifest);
  return manifest_path;
}

Clip read_clip(const std::string& video_path, const std::string& depth_path) {
  Clip clip;
  clip.video = read_dpt(video_path);
  clip.depth = read_dpt(depth_path);
  if (!clip.video.same_shape(clip.depth)) {
    fail(ErrorCode::FormatError, "read_clip: video/depth shape mismatch");
  }
  if (clip.video.ndim() != 4 || clip.video.extent(1) != 1) {
    fail(ErrorCode::FormatError, "read_clip: expected [T,1,H,W]");
  }
  check_unit_range(clip.depth, ErrorCode::InvalidDepth, "depth");
  check_unit_range(clip.video, ErrorCode::InvalidRange, "video");
  return clip;
}

}  // namespace splinediff
