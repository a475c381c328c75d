#include <cmath>

#include "doctest.h"
#include "splinediff/conditioning.hpp"

using namespace splinediff;

TEST_CASE("encode_depth: zero depth with zero parameters gives zero embedding") {
  DepthEncoder<double> enc(4, 6);
  TensorD depth({2, 1, 8, 8});
  DepthEncoderCache<double> cache;
  TensorD out = enc.forward(depth, cache);
  CHECK(out.shape() == std::vector<std::size_t>{2, 6, 2, 2});
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("encode_depth: deterministic under a fixed seed") {
  Rng r1(61), r2(61);
  DepthEncoder<double> a(4, 6), b(4, 6);
  a.init(r1);
  b.init(r2);
  Rng dr(62);
  TensorD depth({2, 1, 8, 8});
  for (std::size_t i = 0; i < depth.numel(); ++i) depth[i] = dr.uniform01();
  DepthEncoderCache<double> ca, cb;
  TensorD oa = a.forward(depth, ca);
  TensorD ob = b.forward(depth, cb);
  for (std::size_t i = 0; i < oa.numel(); ++i) CHECK(oa[i] == ob[i]);
}

TEST_CASE("encode_depth: out-of-range depth rejected") {
  DepthEncoder<double> enc(4, 6);
  TensorD depth({1, 1, 8, 8});
  depth[3] = 1.5;
  DepthEncoderCache<double> cache;
  try {
    enc.forward(depth, cache);
    FAIL("expected InvalidDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidDepth);
  }
}

TEST_CASE("encode_style: zero frame with zero parameters gives the zero vector") {
  StyleEncoder<double> enc(4, 6);
  TensorD frame({1, 8, 8});
  StyleEncoderCache<double> cache;
  TensorD out = enc.forward(frame, cache);
  CHECK(out.shape() == std::vector<std::size_t>{6});
  for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0);
}

TEST_CASE("align: hand-computed scalar case") {
  // (3 - 1)/sqrt(3.9999 + 1e-4) * 0.5 = 2/2 * 0.5 = 0.5
  // z_m built to have mu = 1, biased variance = 3.9999:
  // values {1-a, 1+a} have mean 1 and variance a^2
  const double a = std::sqrt(3.9999);
  TensorD z_m({2, 1, 1, 1}, {1.0 - a, 1.0 + a});
  TensorD z_d({1, 1, 1, 1}, {3.0});
  AlignmentParams<double> params(1, 1e-4);
  params.gamma[0] = 0.5;
  TensorD out = align(z_d, z_m, params, static_cast<AlignCache<double>*>(nullptr));
  CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("align: zero cases") {
  Rng rng(63);
  TensorD z_m({2, 3, 2, 2});
  for (std::size_t i = 0; i < z_m.numel(); ++i) z_m[i] = rng.normal();
  AlignmentParams<double> params(3);
  for (auto& g : params.gamma) g = rng.normal();

  SUBCASE("z_d equal to the per-channel mean maps to zero") {
    // compute per-channel means of z_m and fill z_d with them
    TensorD z_d({2, 3, 2, 2});
    for (std::size_t c = 0; c < 3; ++c) {
      double mu = 0.0;
      for (std::size_t l = 0; l < 2; ++l) {
        for (std::size_t i = 0; i < 4; ++i) mu += z_m[(l * 3 + c) * 4 + i];
      }
      mu /= 8.0;
      for (std::size_t l = 0; l < 2; ++l) {
        for (std::size_t i = 0; i < 4; ++i) z_d[(l * 3 + c) * 4 + i] = mu;
      }
    }
    TensorD out = align(z_d, z_m, params, static_cast<AlignCache<double>*>(nullptr));
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(std::abs(out[i]) <= 1e-12);
  }

  SUBCASE("gamma = 0 annihilates any embedding") {
    std::fill(params.gamma.begin(), params.gamma.end(), 0.0);
    TensorD z_d({2, 3, 2, 2});
    for (std::size_t i = 0; i < z_d.numel(); ++i) z_d[i] = rng.normal();
    TensorD out = align(z_d, z_m, params, static_cast<AlignCache<double>*>(nullptr));
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out[i] == 0.0);
  }

  SUBCASE("channel mismatch rejected") {
    TensorD z_d({2, 4, 2, 2});
    CHECK_THROWS_AS(align(z_d, z_m, params, static_cast<AlignCache<double>*>(nullptr)), Error);
  }
}

TEST_CASE("align: first and second moments after aligning the map to itself") {
  Rng rng(64);
  const std::size_t channels = 4;
  TensorD z_m({8, channels, 4, 4});
  for (std::size_t i = 0; i < z_m.numel(); ++i) z_m[i] = 0.5 + 1.7 * rng.normal();
  AlignmentParams<double> params(channels);
  for (std::size_t c = 0; c < channels; ++c) params.gamma[c] = 0.3 + 0.2 * c;
  TensorD out = align(z_m, z_m, params, static_cast<AlignCache<double>*>(nullptr));
  const std::size_t inner = 16;
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t l = 0; l < 8; ++l) {
      for (std::size_t i = 0; i < inner; ++i) mean += out[(l * channels + c) * inner + i];
    }
    mean /= 8.0 * inner;
    for (std::size_t l = 0; l < 8; ++l) {
      for (std::size_t i = 0; i < inner; ++i) {
        const double v = out[(l * channels + c) * inner + i] - mean;
        var += v * v;
      }
    }
    var /= 8.0 * inner;
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(std::sqrt(var) - std::abs(params.gamma[c])) <= 1e-3);
  }
}

TEST_CASE("align backward: finite differences w.r.t. z_d and gamma") {
  Rng rng(65);
  TensorD z_m({2, 2, 3, 3});
  for (std::size_t i = 0; i < z_m.numel(); ++i) z_m[i] = rng.normal();
  TensorD z_d({2, 2, 3, 3});
  for (std::size_t i = 0; i < z_d.numel(); ++i) z_d[i] = rng.normal();
  AlignmentParams<double> params(2);
  params.gamma[0] = 0.7;
  params.gamma[1] = -0.4;
  TensorD w(z_d.shape());
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.normal();

  auto loss = [&]() {
    TensorD out = align(z_d, z_m, params, static_cast<AlignCache<double>*>(nullptr));
    double l = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) l += w[i] * out[i];
    return l;
  };
  AlignCache<double> cache;
  align(z_d, z_m, params, &cache);
  std::fill(params.gamma_grad.begin(), params.gamma_grad.end(), 0.0);
  TensorD gz = align_backward(cache, w, params);
  const double h = 1e-6;
  for (std::size_t i = 0; i < z_d.numel(); ++i) {
    const double keep = z_d[i];
    z_d[i] = keep + h;
    const double up = loss();
    z_d[i] = keep - h;
    const double dn = loss();
    z_d[i] = keep;
    CHECK(std::abs((up - dn) / (2 * h) - gz[i]) <= 1e-6);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    const double keep = params.gamma[c];
    params.gamma[c] = keep + h;
    const double up = loss();
    params.gamma[c] = keep - h;
    const double dn = loss();
    params.gamma[c] = keep;
    CHECK(std::abs((up - dn) / (2 * h) - params.gamma_grad[c]) <= 1e-5);
  }
}

TEST_CASE("partition_params: prefix predicate per stage") {
  const std::vector<std::string> names = {
      "patch_embed.weight", "time.fc1.weight",  "depth_encoder.conv1.weight",
      "align.gamma",        "style.proj.weight", "block0.spatial.weight",
      "asd.layer0.edge3.7.c", "asd.layer1.mlp.w1", "head.weight"};
  ParamPartition warm = partition_params(names, Stage::Warmup);
  // warmup trains everything except the condition pathway
  for (const auto& n : warm.frozen) {
    CHECK((n.rfind("depth_encoder.", 0) == 0 || n.rfind("align.", 0) == 0 ||
           n.rfind("style.", 0) == 0));
  }
  CHECK(warm.trainable.size() + warm.frozen.size() == names.size());

  ParamPartition inj = partition_params(names, Stage::Injection);
  auto contains = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  CHECK(contains(inj.trainable, "asd.layer0.edge3.7.c"));
  CHECK(contains(inj.trainable, "asd.layer1.mlp.w1"));
  CHECK(contains(inj.trainable, "depth_encoder.conv1.weight"));
  CHECK(contains(inj.trainable, "align.gamma"));
  CHECK(contains(inj.trainable, "style.proj.weight"));
  CHECK(contains(inj.frozen, "block0.spatial.weight"));
  CHECK(contains(inj.frozen, "patch_embed.weight"));
  CHECK(contains(inj.frozen, "head.weight"));
}

TEST_CASE("partition_params: partition property over randomized name sets") {
  Rng rng(66);
  const char* prefixes[] = {"asd.layer",  "depth_encoder.conv", "style.conv",
                            "align.gamma", "block", "head.", "time.fc", "patch_embed."};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> names;
    const int n = 1 + static_cast<int>(rng.uniform_int(30));
    for (int i = 0; i < n; ++i) {
      std::string name = prefixes[rng.uniform_int(8)];
      name += std::to_string(trial) + "_" + std::to_string(i);
      names.push_back(name);
    }
    for (Stage stage : {Stage::Warmup, Stage::Injection}) {
      ParamPartition part = partition_params(names, stage);
      CHECK(part.trainable.size() + part.frozen.size() == names.size());
      for (const auto& t : part.trainable) {
        CHECK(std::find(part.frozen.begin(), part.frozen.end(), t) == part.frozen.end());
      }
    }
  }
  CHECK_THROWS_AS(partition_params({"a", "a"}, Stage::Warmup), Error);
}

TEST_CASE("null bundle carries exact zeros") {
  ConditionBundle<float> null = ConditionBundle<float>::null_bundle();
  CHECK(null.is_null);
  CHECK(null.depth_embedding.numel() == 0);
  CHECK(null.style.numel() == 0);
}
