#pragma once

#include <vector>

#include "splinediff/rng.hpp"
#include "splinediff/tensor.hpp"

namespace splinediff {

/// Fixed corruption schedule: beta_t in (0,1) and the cumulative products
/// alpha_bar_t = prod_{s<=t} (1 - beta_s), computed in f64.
struct NoiseSchedule {
  int steps = 0;                  // T
  std::vector<double> beta;       // [T], beta[t-1] is beta_t
  std::vector<double> alpha_bar;  // [T]
  bool weak = false;              // alpha_bar_T >= 0.01: corruption too weak

  void check_timestep(int t) const {
    if (t < 1 || t > steps) fail(ErrorCode::InvalidTimestep, "timestep out of range");
  }
};

/// Linear beta schedule from beta_lo to beta_hi inclusive. A schedule whose
/// alpha_bar_T >= 0.01 is returned with the `weak` flag set rather than
/// rejected; config validation decides whether that is acceptable.
NoiseSchedule make_schedule(int steps, double beta_lo, double beta_hi);

/// z_t = sqrt(alpha_bar_t) z_0 + sqrt(1 - alpha_bar_t) eps, eps ~ N(0, I).
/// Returns eps through the out-parameter for the Eq.-style MSE objective.
template <typename T>
void forward_marginal(const NoiseSchedule& sched, const Tensor<T>& z0, int t, Rng& rng,
                      Tensor<T>& zt, Tensor<T>& eps) {
  sched.check_timestep(t);
  eps = gaussian_sample<T>(rng, z0.shape());
  zt = Tensor<T>(z0.shape());
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t - 1)];
  const double sa = std::sqrt(ab);
  const double sb = std::sqrt(1.0 - ab);
  for (std::size_t i = 0; i < z0.numel(); ++i) {
    zt[i] = static_cast<T>(sa * static_cast<double>(z0[i]) +
                           sb * static_cast<double>(eps[i]));
  }
}

/// Mean squared error over all elements (per-element normalization).
template <typename T>
double training_loss(const Tensor<T>& eps, const Tensor<T>& eps_pred) {
  if (!eps.same_shape(eps_pred)) {
    fail(ErrorCode::InvalidShape, "training_loss: shape mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.numel(); ++i) {
    const double d = static_cast<double>(eps[i]) - static_cast<double>(eps_pred[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(eps.numel());
}

/// One DDPM ancestral update:
///   z_{t-1} = (z_t - beta_t/sqrt(1-abar_t) * eps) / sqrt(1-beta_t) + sigma_t xi
/// with the "small" posterior variance sigma_t^2 = beta_t (1-abar_{t-1})/(1-abar_t)
/// and sigma_1 = 0 at the terminal step.
template <typename T>
Tensor<T> denoise_step(const NoiseSchedule& sched, const Tensor<T>& model_eps,
                       const Tensor<T>& zt, int t, Rng& rng) {
  sched.check_timestep(t);
  if (!model_eps.same_shape(zt)) {
    fail(ErrorCode::InvalidShape, "denoise_step: model_eps shape mismatch");
  }
  const double beta = sched.beta[static_cast<std::size_t>(t - 1)];
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t - 1)];
  const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
  const double eps_coef = beta / std::sqrt(1.0 - ab);
  Tensor<T> out(zt.shape());
  if (t > 1) {
    const double ab_prev = sched.alpha_bar[static_cast<std::size_t>(t - 2)];
    const double sigma = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
    Tensor<T> xi = gaussian_sample<T>(rng, zt.shape());
    for (std::size_t i = 0; i < zt.numel(); ++i) {
      const double mean = inv_sqrt_alpha * (static_cast<double>(zt[i]) -
                                            eps_coef * static_cast<double>(model_eps[i]));
      out[i] = static_cast<T>(mean + sigma * static_cast<double>(xi[i]));
    }
  } else {
    for (std::size_t i = 0; i < zt.numel(); ++i) {
      out[i] = static_cast<T>(inv_sqrt_alpha * (static_cast<double>(zt[i]) -
                                                eps_coef * static_cast<double>(model_eps[i])));
    }
  }
  out.require_finite("denoise_step");
  return out;
}

/// Exactly invertible per-pixel whitening, the stand-in for a latent encoder/
/// decoder pair. Statistics are per spatial pixel, pooled over clips and
/// frames of the training corpus.
class LatentCodec {
 public:
  LatentCodec() = default;
  LatentCodec(TensorF mean, TensorF scale);

  /// Fits mean/scale [1,H,W] from clips shaped [T_f,1,H,W].
  static LatentCodec fit(const std::vector<TensorF>& clips);

  TensorF encode(const TensorF& clip) const;
  TensorF decode(const TensorF& latent) const;

  const TensorF& mean() const { return mean_; }
  const TensorF& scale() const { return scale_; }
  bool empty() const { return mean_.numel() == 0; }

 private:
  TensorF mean_;   // [1,H,W]
  TensorF scale_;  // [1,H,W], strictly positive
};

}  // namespace splinediff
