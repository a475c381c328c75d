#include "splinediff/metrics.hpp"

#include <cmath>

#include "splinediff/eigen_sym.hpp"
#include "splinediff/rng.hpp"

namespace splinediff {

GaussianStats fit_gaussian_stats(const std::vector<TensorF>& clips,
                                 std::uint64_t projection_seed, std::size_t dim) {
  if (clips.size() < 2) {
    fail(ErrorCode::InsufficientData, "fit_gaussian_stats: need at least 2 clips");
  }
  const std::size_t in_dim = clips.front().numel();
  for (const auto& c : clips) {
    if (c.numel() != in_dim) {
      fail(ErrorCode::InvalidShape, "fit_gaussian_stats: inconsistent clip sizes");
    }
  }
  // fixed seeded projection, entries N(0, 1/in_dim)
  Rng rng(projection_seed);
  TensorD proj({in_dim, dim});
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  for (std::size_t i = 0; i < proj.numel(); ++i) proj[i] = rng.normal() * scale;

  const std::size_t n = clips.size();
  TensorD feats({n, dim});
  for (std::size_t ci = 0; ci < n; ++ci) {
    const float* x = clips[ci].data();
    double* f = feats.data() + ci * dim;
    for (std::size_t i = 0; i < in_dim; ++i) {
      const double xi = static_cast<double>(x[i]);
      if (xi == 0.0) continue;
      const double* prow = proj.data() + i * dim;
      for (std::size_t j = 0; j < dim; ++j) f[j] += xi * prow[j];
    }
  }

  GaussianStats stats;
  stats.n = n;
  stats.dim = dim;
  stats.projection_seed = projection_seed;
  stats.mean = TensorD({dim});
  stats.cov = TensorD({dim, dim});
  for (std::size_t ci = 0; ci < n; ++ci) {
    for (std::size_t j = 0; j < dim; ++j) stats.mean[j] += feats[ci * dim + j];
  }
  for (std::size_t j = 0; j < dim; ++j) stats.mean[j] /= static_cast<double>(n);
  for (std::size_t ci = 0; ci < n; ++ci) {
    const double* f = feats.data() + ci * dim;
    for (std::size_t a = 0; a < dim; ++a) {
      const double da = f[a] - stats.mean[a];
      for (std::size_t b = a; b < dim; ++b) {
        stats.cov[a * dim + b] += da * (f[b] - stats.mean[b]);
      }
    }
  }
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      const double v = stats.cov[a * dim + b] / static_cast<double>(n - 1);
      stats.cov[a * dim + b] = v;
      stats.cov[b * dim + a] = v;
    }
    stats.cov[a * dim + a] += 1e-6;  // shrinkage floor against rank deficiency
  }
  return stats;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim != b.dim || a.projection_seed != b.projection_seed) {
    fail(ErrorCode::IncompatibleStats, "frechet_distance: dimension or projection mismatch");
  }
  const std::size_t d = a.dim;
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a.mean[i] - b.mean[i];
    mean_term += diff * diff;
  }
  TensorD sa = psd_sqrt(a.cov);
  // m = sa * cov_b * sa, symmetrized before the second root
  TensorD tmp({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += sa[i * d + k] * b.cov[k * d + j];
      tmp[i * d + j] = acc;
    }
  }
  TensorD m({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += tmp[i * d + k] * sa[k * d + j];
      m[i * d + j] = acc;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double s = 0.5 * (m[i * d + j] + m[j * d + i]);
      m[i * d + j] = s;
      m[j * d + i] = s;
    }
  }
  TensorD root = psd_sqrt(m);
  double trace_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    trace_term += a.cov[i * d + i] + b.cov[i * d + i] - 2.0 * root[i * d + i];
  }
  return std::max(0.0, mean_term + trace_term);
}

FidelityResult depth_fidelity(const TensorF& generated, const TensorF& depth) {
  if (!generated.same_shape(depth)) {
    fail(ErrorCode::InvalidShape, "depth_fidelity: shape mismatch");
  }
  generated.require_finite("depth_fidelity");
  const std::size_t n = generated.numel();
  double mg = 0.0, md = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mg += static_cast<double>(generated[i]);
    md += 1.0 - static_cast<double>(depth[i]);
  }
  mg /= static_cast<double>(n);
  md /= static_cast<double>(n);
  double sgg = 0.0, sdd = 0.0, sgd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = static_cast<double>(generated[i]) - mg;
    const double d = (1.0 - static_cast<double>(depth[i])) - md;
    sgg += g * g;
    sdd += d * d;
    sgd += g * d;
  }
  if (sgg == 0.0 || sdd == 0.0) return {0.0, true};
  return {sgd / std::sqrt(sgg * sdd), false};
}

double temporal_coherence(const TensorF& clip) {
  if (clip.ndim() < 1 || clip.extent(0) < 2) {
    fail(ErrorCode::InsufficientFrames, "temporal_coherence: need >= 2 frames");
  }
  const std::size_t frames = clip.extent(0);
  const std::size_t stride = clip.numel() / frames;
  double acc = 0.0;
  for (std::size_t f = 0; f + 1 < frames; ++f) {
    const float* a = clip.data() + f * stride;
    const float* b = clip.data() + (f + 1) * stride;
    double frame_acc = 0.0;
    for (std::size_t i = 0; i < stride; ++i) {
      frame_acc += std::abs(static_cast<double>(b[i]) - static_cast<double>(a[i]));
    }
    acc += frame_acc / static_cast<double>(stride);
  }
  return acc / static_cast<double>(frames - 1);
}

}  // namespace splinediff
