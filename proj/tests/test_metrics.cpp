#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "splinediff/metrics.hpp"
#include "splinediff/rng.hpp"

using namespace splinediff;

namespace {

std::vector<TensorF> random_clips(Rng& rng, std::size_t n, std::size_t numel = 128) {
  std::vector<TensorF> clips;
  for (std::size_t i = 0; i < n; ++i) {
    TensorF c({numel});
    for (std::size_t k = 0; k < numel; ++k) c[k] = static_cast<float>(rng.uniform01());
    clips.push_back(c);
  }
  return clips;
}

GaussianStats manual_stats(TensorD mean, TensorD cov, std::uint64_t seed) {
  GaussianStats s;
  s.dim = mean.numel();
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  s.n = 100;
  s.projection_seed = seed;
  return s;
}

}  // namespace

TEST_CASE("fit_gaussian_stats: identical clips collapse to the shrinkage floor") {
  Rng rng(91);
  TensorF clip({64});
  for (std::size_t i = 0; i < clip.numel(); ++i) clip[i] = static_cast<float>(rng.uniform01());
  std::vector<TensorF> clips(6, clip);
  GaussianStats s = fit_gaussian_stats(clips, 1234, 8);
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t b = 0; b < 8; ++b) {
      CHECK(std::abs(s.cov[a * 8 + b] - (a == b ? 1e-6 : 0.0)) <= 1e-12);
    }
  }
}

TEST_CASE("fit_gaussian_stats: deterministic; order-invariant within 1e-9") {
  Rng rng(92);
  std::vector<TensorF> clips = random_clips(rng, 24);
  GaussianStats a = fit_gaussian_stats(clips, 55, 16);
  GaussianStats b = fit_gaussian_stats(clips, 55, 16);
  for (std::size_t i = 0; i < a.mean.numel(); ++i) CHECK(a.mean[i] == b.mean[i]);
  for (std::size_t i = 0; i < a.cov.numel(); ++i) CHECK(a.cov[i] == b.cov[i]);

  std::vector<TensorF> shuffled = clips;
  std::reverse(shuffled.begin(), shuffled.end());
  std::swap(shuffled[3], shuffled[11]);
  GaussianStats c = fit_gaussian_stats(shuffled, 55, 16);
  for (std::size_t i = 0; i < a.mean.numel(); ++i) CHECK(std::abs(a.mean[i] - c.mean[i]) <= 1e-9);
  for (std::size_t i = 0; i < a.cov.numel(); ++i) CHECK(std::abs(a.cov[i] - c.cov[i]) <= 1e-9);

  CHECK_THROWS_AS(fit_gaussian_stats({clips[0]}, 55, 16), Error);
}

TEST_CASE("frechet_distance: identity, 1-d closed form, diagonal closed form") {
  Rng rng(93);
  std::vector<TensorF> clips = random_clips(rng, 16);
  GaussianStats s = fit_gaussian_stats(clips, 7, 8);
  CHECK(frechet_distance(s, s) <= 1e-8);

  // d=1: (mu1-mu2)^2 + (s1-s2)^2
  GaussianStats a1 = manual_stats(TensorD({1}, {0.0}), TensorD({1, 1}, {1.0}), 1);
  GaussianStats b1 = manual_stats(TensorD({1}, {1.0}), TensorD({1, 1}, {1.0}), 1);
  CHECK(frechet_distance(a1, b1) == doctest::Approx(1.0).epsilon(1e-8));
  GaussianStats c1 = manual_stats(TensorD({1}, {0.0}), TensorD({1, 1}, {4.0}), 1);
  // (0-0)^2 + (2-1)^2 = 1
  CHECK(frechet_distance(a1, c1) == doctest::Approx(1.0).epsilon(1e-8));

  // d=2 commuting diagonal covariances, mean shift (1,0)
  GaussianStats a2 = manual_stats(TensorD({2}, {0.0, 0.0}),
                                  TensorD({2, 2}, {0.5, 0.0, 0.0, 2.0}), 2);
  GaussianStats b2 = manual_stats(TensorD({2}, {1.0, 0.0}),
                                  TensorD({2, 2}, {0.5, 0.0, 0.0, 2.0}), 2);
  CHECK(frechet_distance(a2, b2) == doctest::Approx(1.0).epsilon(1e-8));

  GaussianStats wrong_seed = manual_stats(TensorD({2}), TensorD({2, 2}), 3);
  CHECK_THROWS_AS(frechet_distance(a2, wrong_seed), Error);
}

TEST_CASE("frechet_distance: symmetry and non-negativity over 200 random stat pairs") {
  Rng rng(94);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.uniform_int(6);
    auto random_psd = [&](std::size_t dim) {
      TensorD b({dim, dim});
      for (std::size_t i = 0; i < b.numel(); ++i) b[i] = rng.normal();
      TensorD out({dim, dim});
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
          double acc = (i == j) ? 1e-6 : 0.0;
          for (std::size_t k = 0; k < dim; ++k) acc += b[i * dim + k] * b[j * dim + k];
          out[i * dim + j] = acc;
        }
      }
      return out;
    };
    TensorD ma({d}), mb({d});
    for (std::size_t i = 0; i < d; ++i) {
      ma[i] = rng.normal();
      mb[i] = rng.normal();
    }
    GaussianStats a = manual_stats(ma, random_psd(d), 11);
    GaussianStats b = manual_stats(mb, random_psd(d), 11);
    const double ab = frechet_distance(a, b);
    const double ba = frechet_distance(b, a);
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - ba) <= 1e-8 * std::max(1.0, ab));
  }
}

TEST_CASE("frechet_distance: translation by r adds exactly r^2 under equal covariance") {
  Rng rng(95);
  std::vector<TensorF> clips = random_clips(rng, 20);
  GaussianStats a = fit_gaussian_stats(clips, 7, 8);
  GaussianStats b = a;
  double r2 = 0.0;
  for (std::size_t i = 0; i < b.mean.numel(); ++i) {
    const double shift = rng.normal();
    b.mean[i] += shift;
    r2 += shift * shift;
  }
  CHECK(frechet_distance(a, b) == doctest::Approx(r2).epsilon(1e-6));
}

TEST_CASE("depth_fidelity: affine identity, sentinel, anti-correlation, bounds") {
  TensorF depth({2, 1, 4, 4});
  Rng rng(96);
  for (std::size_t i = 0; i < depth.numel(); ++i) {
    depth[i] = static_cast<float>(rng.uniform01());
  }
  TensorF inv(depth.shape());
  for (std::size_t i = 0; i < depth.numel(); ++i) inv[i] = 1.0f - depth[i];
  FidelityResult plus = depth_fidelity(inv, depth);
  CHECK(plus.value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(plus.degenerate);

  FidelityResult minus = depth_fidelity(depth, depth);
  CHECK(minus.value == doctest::Approx(-1.0).epsilon(1e-6));

  TensorF constant(depth.shape());
  constant.fill(0.25f);
  FidelityResult flat = depth_fidelity(constant, depth);
  CHECK(flat.degenerate);
  CHECK(flat.value == 0.0);

  TensorF wrong({3});
  CHECK_THROWS_AS(depth_fidelity(wrong, depth), Error);

  for (int trial = 0; trial < 50; ++trial) {
    TensorF g(depth.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] = static_cast<float>(rng.normal());
    FidelityResult r = depth_fidelity(g, depth);
    CHECK(r.value >= -1.0);
    CHECK(r.value <= 1.0);
  }
}

TEST_CASE("temporal_coherence: static, alternating, and error cases") {
  TensorF still({4, 1, 2, 2});
  still.fill(0.7f);
  CHECK(temporal_coherence(still) == 0.0);

  TensorF alternating({4, 1, 2, 2});
  for (std::size_t f = 0; f < 4; ++f) {
    for (std::size_t i = 0; i < 4; ++i) {
      alternating[f * 4 + i] = (f % 2 == 0) ? 0.0f : 1.0f;
    }
  }
  CHECK(temporal_coherence(alternating) == doctest::Approx(1.0));

  TensorF one({1, 1, 2, 2});
  CHECK_THROWS_AS(temporal_coherence(one), Error);
}
