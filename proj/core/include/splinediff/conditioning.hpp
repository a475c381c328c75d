#pragma once

#include <string>
#include <vector>

#include "splinediff/conv.hpp"
#include "splinediff/kan.hpp"
#include "splinediff/rng.hpp"
#include "splinediff/tensor.hpp"

namespace splinediff {

// ---------------------------------------------------------------------------
// Depth encoder: two strided 3x3 convs (SiLU between) mapping the depth
// sequence [T,1,H,W] in [0,1] to the embedding z_d [T,C,H/4,W/4].
// ---------------------------------------------------------------------------

template <typename T>
struct DepthEncoderCache {
  Tensor<T> input;
  Tensor<T> pre1;  // conv1 output + bias, before SiLU
  Tensor<T> act1;
};

template <typename T>
class DepthEncoder {
 public:
  DepthEncoder() = default;
  DepthEncoder(int mid_channels, int out_channels)
      : mid_(mid_channels),
        out_(out_channels),
        w1({static_cast<std::size_t>(mid_channels), 1, 3, 3}),
        b1({static_cast<std::size_t>(mid_channels)}),
        w2({static_cast<std::size_t>(out_channels), static_cast<std::size_t>(mid_channels), 3,
            3}),
        b2({static_cast<std::size_t>(out_channels)}),
        w1_g(w1.shape()),
        b1_g(b1.shape()),
        w2_g(w2.shape()),
        b2_g(b2.shape()) {}

  void init(Rng& rng) {
    const double s1 = 1.0 / 3.0;  // 1/sqrt(fan_in), fan_in = 9
    const double s2 = 1.0 / std::sqrt(9.0 * mid_);
    for (std::size_t i = 0; i < w1.numel(); ++i) w1[i] = static_cast<T>(rng.normal() * s1);
    for (std::size_t i = 0; i < w2.numel(); ++i) w2[i] = static_cast<T>(rng.normal() * s2);
    b1.fill(T(0));
    b2.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& depth, DepthEncoderCache<T>& cache) const {
    if (depth.ndim() != 4 || depth.extent(1) != 1) {
      fail(ErrorCode::InvalidShape, "encode_depth: expected [T,1,H,W]");
    }
    for (std::size_t i = 0; i < depth.numel(); ++i) {
      const double v = static_cast<double>(depth[i]);
      if (!(v >= 0.0 && v <= 1.0)) {
        fail(ErrorCode::InvalidDepth, "encode_depth: depth values must lie in [0,1]");
      }
    }
    cache.input = depth;
    Tensor<T> h = conv2d(depth, w1, 2, 1);
    add_channel_bias(h, b1);
    cache.pre1 = h;
    for (std::size_t i = 0; i < h.numel(); ++i) {
      h[i] = static_cast<T>(silu(static_cast<double>(h[i])));
    }
    cache.act1 = h;
    Tensor<T> out = conv2d(h, w2, 2, 1);
    add_channel_bias(out, b2);
    return out;
  }

  void backward(const DepthEncoderCache<T>& cache, const Tensor<T>& grad_out) {
    Tensor<T> g_act1(cache.act1.shape());
    conv2d_backward(cache.act1, w2, 2, 1, grad_out, g_act1, w2_g);
    accumulate_channel_bias_grad(grad_out, b2_g);
    for (std::size_t i = 0; i < g_act1.numel(); ++i) {
      g_act1[i] = static_cast<T>(static_cast<double>(g_act1[i]) *
                                 silu_grad(static_cast<double>(cache.pre1[i])));
    }
    Tensor<T> g_in(cache.input.shape());
    conv2d_backward(cache.input, w1, 2, 1, g_act1, g_in, w1_g);
    accumulate_channel_bias_grad(g_act1, b1_g);
  }

  void zero_grads() {
    w1_g.fill(T(0));
    b1_g.fill(T(0));
    w2_g.fill(T(0));
    b2_g.fill(T(0));
  }

  int mid_ = 0, out_ = 0;
  Tensor<T> w1, b1, w2, b2;
  Tensor<T> w1_g, b1_g, w2_g, b2_g;

  static void add_channel_bias(Tensor<T>& x, const Tensor<T>& bias) {
    const std::size_t n = x.extent(0), c = x.extent(1), hw = x.extent(2) * x.extent(3);
    for (std::size_t ni = 0; ni < n; ++ni) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        T* p = x.data() + (ni * c + ci) * hw;
        for (std::size_t i = 0; i < hw; ++i) p[i] += bias[ci];
      }
    }
  }

  static void accumulate_channel_bias_grad(const Tensor<T>& grad, Tensor<T>& bias_grad) {
    const std::size_t n = grad.extent(0), c = grad.extent(1),
                      hw = grad.extent(2) * grad.extent(3);
    for (std::size_t ni = 0; ni < n; ++ni) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* p = grad.data() + (ni * c + ci) * hw;
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(p[i]);
        bias_grad[ci] += static_cast<T>(acc);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Style encoder: conv/SiLU/conv/SiLU then global average pooling to a d_s
// vector from the clean first frame. Stands in for the frozen image encoder.
// ---------------------------------------------------------------------------

template <typename T>
struct StyleEncoderCache {
  Tensor<T> input;  // [1,1,H,W]
  Tensor<T> pre1, act1, pre2, act2;
};

template <typename T>
class StyleEncoder {
 public:
  StyleEncoder() = default;
  StyleEncoder(int mid_channels, int style_dim)
      : mid_(mid_channels),
        dim_(style_dim),
        w1({static_cast<std::size_t>(mid_channels), 1, 3, 3}),
        b1({static_cast<std::size_t>(mid_channels)}),
        w2({static_cast<std::size_t>(style_dim), static_cast<std::size_t>(mid_channels), 3, 3}),
        b2({static_cast<std::size_t>(style_dim)}),
        w1_g(w1.shape()),
        b1_g(b1.shape()),
        w2_g(w2.shape()),
        b2_g(b2.shape()) {}

  void init(Rng& rng) {
    const double s1 = 1.0 / 3.0;
    const double s2 = 1.0 / std::sqrt(9.0 * mid_);
    for (std::size_t i = 0; i < w1.numel(); ++i) w1[i] = static_cast<T>(rng.normal() * s1);
    for (std::size_t i = 0; i < w2.numel(); ++i) w2[i] = static_cast<T>(rng.normal() * s2);
    b1.fill(T(0));
    b2.fill(T(0));
  }

  /// frame: [1,H,W] -> style vector [d_s]
  Tensor<T> forward(const Tensor<T>& frame, StyleEncoderCache<T>& cache) const {
    if (frame.ndim() != 3 || frame.extent(0) != 1) {
      fail(ErrorCode::InvalidShape, "encode_style: expected [1,H,W]");
    }
    frame.require_finite("encode_style");
    cache.input = Tensor<T>({1, 1, frame.extent(1), frame.extent(2)},
                            std::vector<T>(frame.data(), frame.data() + frame.numel()));
    Tensor<T> h = conv2d(cache.input, w1, 2, 1);
    DepthEncoder<T>::add_channel_bias(h, b1);
    cache.pre1 = h;
    for (std::size_t i = 0; i < h.numel(); ++i) {
      h[i] = static_cast<T>(silu(static_cast<double>(h[i])));
    }
    cache.act1 = h;
    Tensor<T> h2 = conv2d(h, w2, 2, 1);
    DepthEncoder<T>::add_channel_bias(h2, b2);
    cache.pre2 = h2;
    for (std::size_t i = 0; i < h2.numel(); ++i) {
      h2[i] = static_cast<T>(silu(static_cast<double>(h2[i])));
    }
    cache.act2 = h2;
    // global average pool over the spatial grid
    const std::size_t hw = h2.extent(2) * h2.extent(3);
    Tensor<T> style({static_cast<std::size_t>(dim_)});
    for (int c = 0; c < dim_; ++c) {
      const T* p = h2.data() + static_cast<std::size_t>(c) * hw;
      double acc = 0.0;
      for (std::size_t i = 0; i < hw; ++i) acc += static_cast<double>(p[i]);
      style[static_cast<std::size_t>(c)] = static_cast<T>(acc / static_cast<double>(hw));
    }
    return style;
  }

  void backward(const StyleEncoderCache<T>& cache, const Tensor<T>& grad_style) {
    const std::size_t hw = cache.act2.extent(2) * cache.act2.extent(3);
    Tensor<T> g2(cache.act2.shape());
    for (int c = 0; c < dim_; ++c) {
      const T g = static_cast<T>(static_cast<double>(grad_style[static_cast<std::size_t>(c)]) /
                                 static_cast<double>(hw));
      T* p = g2.data() + static_cast<std::size_t>(c) * hw;
      for (std::size_t i = 0; i < hw; ++i) p[i] = g;
    }
    for (std::size_t i = 0; i < g2.numel(); ++i) {
      g2[i] = static_cast<T>(static_cast<double>(g2[i]) *
                             silu_grad(static_cast<double>(cache.pre2[i])));
    }
    Tensor<T> g_act1(cache.act1.shape());
    conv2d_backward(cache.act1, w2, 2, 1, g2, g_act1, w2_g);
    DepthEncoder<T>::accumulate_channel_bias_grad(g2, b2_g);
    for (std::size_t i = 0; i < g_act1.numel(); ++i) {
      g_act1[i] = static_cast<T>(static_cast<double>(g_act1[i]) *
                                 silu_grad(static_cast<double>(cache.pre1[i])));
    }
    Tensor<T> g_in(cache.input.shape());
    conv2d_backward(cache.input, w1, 2, 1, g_act1, g_in, w1_g);
    DepthEncoder<T>::accumulate_channel_bias_grad(g_act1, b1_g);
  }

  void zero_grads() {
    w1_g.fill(T(0));
    b1_g.fill(T(0));
    w2_g.fill(T(0));
    b2_g.fill(T(0));
  }

  int mid_ = 0, dim_ = 0;
  Tensor<T> w1, b1, w2, b2;
  Tensor<T> w1_g, b1_g, w2_g, b2_g;
};

// ---------------------------------------------------------------------------
// Statistics alignment: z_hat = (z_d - mu_m) / sqrt(sigma_m^2 + eps) * gamma
// with per-channel mu_m, sigma_m^2 taken over all non-channel axes of the
// backbone feature map z_m. The statistics are stop-gradient: no gradient
// flows into the backbone through the normalizer.
// ---------------------------------------------------------------------------

template <typename T>
struct AlignmentParams {
  std::vector<T> gamma;       // per channel; a scalar gamma is the 1-channel case
  double align_eps = 1e-5;    // the Eq. 1 stability constant
  std::vector<T> gamma_grad;

  explicit AlignmentParams(int channels = 0, double eps = 1e-5)
      : gamma(static_cast<std::size_t>(channels), T(0)),
        align_eps(eps),
        gamma_grad(static_cast<std::size_t>(channels), T(0)) {}
};

template <typename T>
struct AlignCache {
  Tensor<T> normalized;       // (z_d - mu)/sqrt(var+eps), cached for d(gamma)
  std::vector<double> inv_std;  // per channel
};

/// Channel axis is dim 1; statistics reduce over every other axis of z_m.
template <typename T>
Tensor<T> align(const Tensor<T>& z_d, const Tensor<T>& z_m, const AlignmentParams<T>& params,
                AlignCache<T>* cache) {
  if (z_d.ndim() < 2 || z_m.ndim() < 2 || z_d.extent(1) != z_m.extent(1)) {
    fail(ErrorCode::InvalidShape, "align: channel mismatch");
  }
  const std::size_t channels = z_d.extent(1);
  if (params.gamma.size() != channels) {
    fail(ErrorCode::InvalidShape, "align: gamma size mismatch");
  }
  // per-channel moments of the backbone map
  std::vector<double> mu(channels, 0.0), var(channels, 0.0);
  {
    const std::size_t lead = z_m.extent(0);
    std::size_t inner = 1;
    for (std::size_t a = 2; a < z_m.ndim(); ++a) inner *= z_m.extent(a);
    const double count = static_cast<double>(lead * inner);
    for (std::size_t l = 0; l < lead; ++l) {
      for (std::size_t c = 0; c < channels; ++c) {
        const T* p = z_m.data() + (l * channels + c) * inner;
        double s = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
          s += static_cast<double>(p[i]);
          ss += static_cast<double>(p[i]) * static_cast<double>(p[i]);
        }
        mu[c] += s;
        var[c] += ss;
      }
    }
    for (std::size_t c = 0; c < channels; ++c) {
      mu[c] /= count;
      var[c] = std::max(0.0, var[c] / count - mu[c] * mu[c]);
    }
  }
  Tensor<T> out(z_d.shape());
  if (cache != nullptr) {
    cache->normalized = Tensor<T>(z_d.shape());
    cache->inv_std.assign(channels, 0.0);
  }
  const std::size_t lead = z_d.extent(0);
  std::size_t inner = 1;
  for (std::size_t a = 2; a < z_d.ndim(); ++a) inner *= z_d.extent(a);
  for (std::size_t c = 0; c < channels; ++c) {
    const double inv = 1.0 / std::sqrt(var[c] + params.align_eps);
    if (cache != nullptr) cache->inv_std[c] = inv;
    const double g = static_cast<double>(params.gamma[c]);
    for (std::size_t l = 0; l < lead; ++l) {
      const T* p = z_d.data() + (l * channels + c) * inner;
      T* o = out.data() + (l * channels + c) * inner;
      T* nm = cache != nullptr ? cache->normalized.data() + (l * channels + c) * inner : nullptr;
      for (std::size_t i = 0; i < inner; ++i) {
        const double norm = (static_cast<double>(p[i]) - mu[c]) * inv;
        if (nm != nullptr) nm[i] = static_cast<T>(norm);
        o[i] = static_cast<T>(norm * g);
      }
    }
  }
  return out;
}

/// Backward of align: d z_d = g_out * gamma_c * inv_std_c; gamma grads
/// accumulate; mu/sigma are treated as constants.
template <typename T>
Tensor<T> align_backward(const AlignCache<T>& cache, const Tensor<T>& grad_out,
                         AlignmentParams<T>& params) {
  const std::size_t channels = grad_out.extent(1);
  const std::size_t lead = grad_out.extent(0);
  std::size_t inner = 1;
  for (std::size_t a = 2; a < grad_out.ndim(); ++a) inner *= grad_out.extent(a);
  Tensor<T> grad_zd(grad_out.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const double coeff = static_cast<double>(params.gamma[c]) * cache.inv_std[c];
    double gacc = 0.0;
    for (std::size_t l = 0; l < lead; ++l) {
      const T* go = grad_out.data() + (l * channels + c) * inner;
      const T* nm = cache.normalized.data() + (l * channels + c) * inner;
      T* gz = grad_zd.data() + (l * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        gacc += static_cast<double>(go[i]) * static_cast<double>(nm[i]);
        gz[i] = static_cast<T>(static_cast<double>(go[i]) * coeff);
      }
    }
    params.gamma_grad[c] += static_cast<T>(gacc);
  }
  return grad_zd;
}

// ---------------------------------------------------------------------------
// Condition bundle and the two-stage parameter partition.
// ---------------------------------------------------------------------------

/// The condition c of the training objective. Holds the encoded (pre-
/// alignment) depth embedding and the encoded style vector; alignment against
/// the backbone feature map happens inside the denoiser forward, where that
/// map exists. A null bundle carries exact zeros and selects the
/// unconditional path.
template <typename T>
struct ConditionBundle {
  bool is_null = true;
  Tensor<T> depth_embedding;  // z_d [T,C,h,w]
  Tensor<T> style;            // [d_s]

  static ConditionBundle null_bundle() { return ConditionBundle{}; }
};

enum class Stage { Warmup, Injection };

const char* to_string(Stage stage);
Stage stage_from_string(const std::string& s);

struct ParamPartition {
  std::vector<std::string> trainable;
  std::vector<std::string> frozen;
};

/// Warmup trains everything except the (unused) condition pathway; Injection
/// trains exactly {asd.*, depth_encoder.*, align.gamma, style.*} and freezes
/// the rest. The two sets always partition the input names.
ParamPartition partition_params(const std::vector<std::string>& names, Stage stage);

bool trainable_in_stage(const std::string& name, Stage stage);

}  // namespace splinediff
