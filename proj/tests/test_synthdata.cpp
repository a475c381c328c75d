#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "splinediff/metrics.hpp"
#include "splinediff/synthdata.hpp"
#include "splinediff/tensor_io.hpp"

using namespace splinediff;

TEST_CASE("generate_clip: zero amplitude keeps the center pixel at full depth") {
  TubeParams p;
  p.amplitude = 0.0;
  p.radius = 5.0;
  p.seed = 1;
  Clip clip = generate_clip(p);
  const std::size_t h = 16, w = 16;
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(clip.depth[t * h * w + 8 * w + 8] == doctest::Approx(1.0));
  }
}

TEST_CASE("generate_clip: clean linear shading is exactly anti-correlated with depth") {
  TubeParams p;
  p.noise_std = 0.0;
  p.texture_amp = 0.0;
  p.shading_exp = 1.0;
  p.amplitude = 2.0;
  p.radius = 6.0;
  p.seed = 2;
  Clip clip = generate_clip(p);
  FidelityResult corr = depth_fidelity(clip.video, clip.depth);
  CHECK_FALSE(corr.degenerate);
  CHECK(corr.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("generate_clip: deterministic from the seed; ranges hold") {
  TubeParams p;
  p.noise_std = 0.05;
  p.seed = 77;
  Clip a = generate_clip(p);
  Clip b = generate_clip(p);
  for (std::size_t i = 0; i < a.video.numel(); ++i) {
    CHECK(a.video[i] == b.video[i]);
    CHECK(a.depth[i] == b.depth[i]);
    CHECK(a.video[i] >= 0.0f);
    CHECK(a.video[i] <= 1.0f);
    CHECK(a.depth[i] >= 0.0f);
    CHECK(a.depth[i] <= 1.0f);
  }
}

TEST_CASE("generate_clip: invalid parameters rejected") {
  TubeParams p;
  p.radius = 0.0;
  CHECK_THROWS_AS(generate_clip(p), Error);
  TubeParams q;
  q.noise_std = -0.1;
  CHECK_THROWS_AS(generate_clip(q), Error);
  TubeParams r;
  r.amplitude = std::nan("");
  CHECK_THROWS_AS(generate_clip(r), Error);
}

TEST_CASE("depth/appearance coupling with texture: noiseless corr of the known map is 1") {
  Rng rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    Rng clip_rng = rng.fork(trial);
    TubeParams p = draw_tube_params(clip_rng);
    p.noise_std = 0.0;
    Clip clip = generate_clip(p);
    // reconstruct the deterministic intensity map from depth; feeding its
    // complement to depth_fidelity yields corr(video, map)
    TensorF complement(clip.depth.shape());
    for (std::size_t i = 0; i < clip.depth.numel(); ++i) {
      const double depth = clip.depth[i];
      const double v = std::pow(1.0 - depth, p.shading_exp) +
                       p.texture_amp * std::sin(6.0 * 3.14159265358979323846 * depth);
      complement[i] = static_cast<float>(1.0 - std::clamp(v, 0.0, 1.0));
    }
    FidelityResult corr = depth_fidelity(clip.video, complement);
    CHECK(corr.value == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("temporal smoothness is monotone in angular speed") {
  TubeParams p;
  p.amplitude = 4.0;
  p.radius = 5.0;
  p.texture_amp = 0.0;
  p.noise_std = 0.0;
  p.shading_exp = 1.0;
  p.seed = 5;
  double prev = -1.0;
  for (double omega : {0.1, 0.3, 0.5, 0.7}) {
    p.angular_speed = omega;
    Clip clip = generate_clip(p);
    const double coherence = temporal_coherence(clip.video);
    CHECK(coherence > prev);
    prev = coherence;
  }
}

TEST_CASE("train_split_count: round-half-up of 0.8 n") {
  CHECK(train_split_count(5) == 4);
  CHECK(train_split_count(256) == 205);
  CHECK(train_split_count(1) == 1);
  CHECK(train_split_count(10) == 8);
}

TEST_CASE("make_corpus: files, manifest, split counts, and byte determinism") {
  namespace fs = std::filesystem;
  const std::string dir_a = "/tmp/splinediff_corpus_a";
  const std::string dir_b = "/tmp/splinediff_corpus_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  const std::string mpath = make_corpus(5, 123, dir_a);
  CHECK(mpath == dir_a + "/manifest.json");
  Manifest m = read_manifest(mpath);
  CHECK(m.entries.size() == 5);
  std::size_t train = 0, eval = 0;
  for (const auto& e : m.entries) (e.split == "train" ? train : eval)++;
  CHECK(train == 4);
  CHECK(eval == 1);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir_a)) {
    if (e.path().extension() == ".dpt") ++files;
  }
  CHECK(files == 10);

  make_corpus(5, 123, dir_b);
  auto bytes = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
  };
  CHECK(bytes(dir_a + "/manifest.json") == bytes(dir_b + "/manifest.json"));
  for (const auto& e : m.entries) {
    CHECK(bytes(dir_a + "/" + e.id + ".video.dpt") == bytes(dir_b + "/" + e.id + ".video.dpt"));
    CHECK(bytes(dir_a + "/" + e.id + ".depth.dpt") == bytes(dir_b + "/" + e.id + ".depth.dpt"));
  }

  SUBCASE("read_clip round trips every written file exactly") {
    for (const auto& e : m.entries) {
      Clip clip = read_clip(dir_a + "/" + e.id + ".video.dpt",
                            dir_a + "/" + e.id + ".depth.dpt");
      Clip regen = generate_clip(e.params, m.geometry);
      for (std::size_t i = 0; i < clip.video.numel(); ++i) {
        CHECK(clip.video[i] == regen.video[i]);
        CHECK(clip.depth[i] == regen.depth[i]);
      }
    }
  }

  SUBCASE("read_clip rejects out-of-range depth") {
    TensorF bad({2, 1, 4, 4});
    bad.fill(1.5f);
    write_dpt(dir_a + "/bad.depth.dpt", bad);
    TensorF vid({2, 1, 4, 4});
    write_dpt(dir_a + "/bad.video.dpt", vid);
    try {
      read_clip(dir_a + "/bad.video.dpt", dir_a + "/bad.depth.dpt");
      FAIL("expected InvalidDepth");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidDepth);
    }
  }

  SUBCASE("truncated clip file is a FormatError") {
    const std::string path = dir_a + "/clip_00000.video.dpt";
    std::string all;
    {
      std::ifstream is(path, std::ios::binary);
      all.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }
    const std::string cut_path = dir_a + "/cut.video.dpt";
    std::ofstream os(cut_path, std::ios::binary);
    os.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
    os.close();
    try {
      read_clip(cut_path, dir_a + "/clip_00000.depth.dpt");
      FAIL("expected FormatError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FormatError);
    }
  }
}

TEST_CASE("make_corpus: unwritable directory is an IoError") {
  CHECK_THROWS_AS(make_corpus(1, 1, "/proc/definitely/not/writable"), Error);
}
