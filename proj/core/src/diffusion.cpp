#include "splinediff/diffusion.hpp"

namespace splinediff {

NoiseSchedule make_schedule(int steps, double beta_lo, double beta_hi) {
  if (steps < 1) fail(ErrorCode::InvalidSchedule, "make_schedule: steps must be >= 1");
  if (!(beta_lo > 0.0) || !(beta_lo <= beta_hi) || !(beta_hi < 1.0)) {
    fail(ErrorCode::InvalidSchedule, "make_schedule: need 0 < beta_lo <= beta_hi < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(static_cast<std::size_t>(steps));
  s.alpha_bar.resize(static_cast<std::size_t>(steps));
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double frac = (steps == 1) ? 0.0 : static_cast<double>(t) / (steps - 1);
    const double beta = beta_lo + (beta_hi - beta_lo) * frac;
    prod *= 1.0 - beta;
    s.beta[static_cast<std::size_t>(t)] = beta;
    s.alpha_bar[static_cast<std::size_t>(t)] = prod;
  }
  s.weak = s.alpha_bar.back() >= 0.01;
  return s;
}

LatentCodec::LatentCodec(TensorF mean, TensorF scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
  if (!mean_.same_shape(scale_)) {
    fail(ErrorCode::InvalidShape, "LatentCodec: mean/scale shape mismatch");
  }
  for (std::size_t i = 0; i < scale_.numel(); ++i) {
    if (!(scale_[i] > 0.0f)) fail(ErrorCode::InvalidParams, "LatentCodec: scale must be > 0");
  }
}

LatentCodec LatentCodec::fit(const std::vector<TensorF>& clips) {
  if (clips.empty()) fail(ErrorCode::InsufficientData, "LatentCodec::fit: no clips");
  const auto& shape = clips.front().shape();
  if (shape.size() != 4 || shape[1] != 1) {
    fail(ErrorCode::InvalidShape, "LatentCodec::fit: expected clips [T,1,H,W]");
  }
  const std::size_t frames = shape[0], h = shape[2], w = shape[3];
  const std::size_t px = h * w;
  std::vector<double> sum(px, 0.0), sumsq(px, 0.0);
  double n = 0.0;
  for (const TensorF& clip : clips) {
    if (clip.shape() != shape) {
      fail(ErrorCode::InvalidShape, "LatentCodec::fit: inconsistent clip shapes");
    }
    for (std::size_t f = 0; f < frames; ++f) {
      const float* fr = clip.data() + f * px;
      for (std::size_t i = 0; i < px; ++i) {
        sum[i] += fr[i];
        sumsq[i] += static_cast<double>(fr[i]) * fr[i];
      }
    }
    n += static_cast<double>(frames);
  }
  TensorF mean({1, h, w});
  TensorF scale({1, h, w});
  for (std::size_t i = 0; i < px; ++i) {
    const double m = sum[i] / n;
    const double var = std::max(0.0, sumsq[i] / n - m * m);
    mean[i] = static_cast<float>(m);
    scale[i] = static_cast<float>(std::sqrt(var + 1e-6));
  }
  return LatentCodec(std::move(mean), std::move(scale));
}

TensorF LatentCodec::encode(const TensorF& clip) const {
  if (empty()) fail(ErrorCode::MissingState, "LatentCodec: not fitted");
  if (clip.ndim() != 4 || clip.extent(2) != mean_.extent(1) ||
      clip.extent(3) != mean_.extent(2)) {
    fail(ErrorCode::InvalidShape, "LatentCodec::encode: shape mismatch");
  }
  TensorF out(clip.shape());
  const std::size_t px = mean_.numel();
  const std::size_t planes = clip.numel() / px;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const float* in = clip.data() + pl * px;
    float* o = out.data() + pl * px;
    for (std::size_t i = 0; i < px; ++i) {
      o[i] = static_cast<float>((static_cast<double>(in[i]) - mean_[i]) / scale_[i]);
    }
  }
  return out;
}

TensorF LatentCodec::decode(const TensorF& latent) const {
  if (empty()) fail(ErrorCode::MissingState, "LatentCodec: not fitted");
  TensorF out(latent.shape());
  const std::size_t px = mean_.numel();
  const std::size_t planes = latent.numel() / px;
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const float* in = latent.data() + pl * px;
    float* o = out.data() + pl * px;
    for (std::size_t i = 0; i < px; ++i) {
      o[i] = static_cast<float>(static_cast<double>(in[i]) * scale_[i] + mean_[i]);
    }
  }
  return out;
}

}  // namespace splinediff
