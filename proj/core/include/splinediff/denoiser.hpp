#pragma once

#include <memory>
#include <string>
#include <vector>

#include "splinediff/conditioning.hpp"
#include "splinediff/conv.hpp"
#include "splinediff/kan.hpp"
#include "splinediff/tensor.hpp"

namespace splinediff {

struct ModelDims {
  int frames = 8;
  int height = 16;
  int width = 16;
  int channels = 32;   // C_e, token feature width
  int blocks = 3;
  int patch = 4;       // patch embed kernel == stride
  int time_dim = 64;   // timestep embedding width
  int style_dim = 16;  // d_s
  int depth_mid = 16;  // depth encoder hidden channels
  int style_mid = 8;   // style encoder hidden channels
  int grid_intervals = 8;
  int spline_order = 3;
  double spline_lo = -3.0;
  double spline_hi = 3.0;
  bool use_asd = true;
  bool use_pda = true;

  int feat_h() const { return height / patch; }
  int feat_w() const { return width / patch; }
  int tokens() const { return feat_h() * feat_w(); }
  std::size_t kan_param_target() const {
    return static_cast<std::size_t>(channels) * channels *
           (static_cast<std::size_t>(grid_intervals + spline_order) + 2);
  }
};

/// Named view into a parameter and its gradient buffer. Pointers stay valid
/// because Denoiser is immovable after construction.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<std::size_t> shape;
  T* value = nullptr;
  T* grad = nullptr;
  std::size_t size = 0;
};

/// Parameter-matched linear+SiLU residual body used by the no-asd ablation:
/// out = w2 * silu(w1 * x + b1) + b2, hidden width chosen so the parameter
/// count matches the KAN layer it replaces.
template <typename T>
class MlpBlock {
 public:
  MlpBlock() = default;
  MlpBlock(int n, std::size_t target_params) : n_(n) {
    hidden_ = static_cast<int>((target_params - static_cast<std::size_t>(n)) /
                               (2 * static_cast<std::size_t>(n) + 1));
    w1.assign(static_cast<std::size_t>(hidden_) * n_, T(0));
    b1.assign(static_cast<std::size_t>(hidden_), T(0));
    w2.assign(static_cast<std::size_t>(n_) * hidden_, T(0));
    b2.assign(static_cast<std::size_t>(n_), T(0));
    w1_g.assign(w1.size(), T(0));
    b1_g.assign(b1.size(), T(0));
    w2_g.assign(w2.size(), T(0));
    b2_g.assign(b2.size(), T(0));
  }

  void init(Rng& rng) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(n_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (T& v : w1) v = static_cast<T>(rng.normal() * s1);
    for (T& v : w2) v = static_cast<T>(rng.normal() * s2);
  }

  int hidden() const { return hidden_; }

  Tensor<T> forward(const Tensor<T>& x, Tensor<T>& pre_cache) const {
    const std::size_t batch = x.extent(0);
    pre_cache = Tensor<T>({batch, static_cast<std::size_t>(hidden_)});
    Tensor<T> out({batch, static_cast<std::size_t>(n_)});
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = x.data() + b * n_;
      T* pre = pre_cache.data() + b * hidden_;
      for (int hdx = 0; hdx < hidden_; ++hdx) {
        const T* w = w1.data() + static_cast<std::size_t>(hdx) * n_;
        double acc = static_cast<double>(b1[static_cast<std::size_t>(hdx)]);
        for (int i = 0; i < n_; ++i) acc += static_cast<double>(w[i]) * row[i];
        pre[hdx] = static_cast<T>(acc);
      }
      T* o = out.data() + b * n_;
      for (int j = 0; j < n_; ++j) {
        const T* w = w2.data() + static_cast<std::size_t>(j) * hidden_;
        double acc = static_cast<double>(b2[static_cast<std::size_t>(j)]);
        for (int hdx = 0; hdx < hidden_; ++hdx) {
          acc += static_cast<double>(w[hdx]) * silu(static_cast<double>(pre[hdx]));
        }
        o[j] = static_cast<T>(acc);
      }
    }
    return out;
  }

  void backward(const Tensor<T>& x, const Tensor<T>& pre_cache, const Tensor<T>& grad_out,
                Tensor<T>* grad_in) {
    const std::size_t batch = x.extent(0);
    std::vector<double> dpre(static_cast<std::size_t>(hidden_));
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = x.data() + b * n_;
      const T* pre = pre_cache.data() + b * hidden_;
      const T* go = grad_out.data() + b * n_;
      std::fill(dpre.begin(), dpre.end(), 0.0);
      for (int j = 0; j < n_; ++j) {
        const double g = static_cast<double>(go[j]);
        if (g == 0.0) continue;
        const T* w = w2.data() + static_cast<std::size_t>(j) * hidden_;
        T* wg = w2_g.data() + static_cast<std::size_t>(j) * hidden_;
        for (int hdx = 0; hdx < hidden_; ++hdx) {
          wg[hdx] += static_cast<T>(g * silu(static_cast<double>(pre[hdx])));
          dpre[static_cast<std::size_t>(hdx)] += g * static_cast<double>(w[hdx]);
        }
        b2_g[static_cast<std::size_t>(j)] += static_cast<T>(g);
      }
      if (grad_in != nullptr) {
        T* gi = grad_in->data() + b * n_;
        for (int i = 0; i < n_; ++i) gi[i] = T(0);
      }
      for (int hdx = 0; hdx < hidden_; ++hdx) {
        const double d = dpre[static_cast<std::size_t>(hdx)] *
                         silu_grad(static_cast<double>(pre[hdx]));
        if (d == 0.0) continue;
        const T* w = w1.data() + static_cast<std::size_t>(hdx) * n_;
        T* wg = w1_g.data() + static_cast<std::size_t>(hdx) * n_;
        for (int i = 0; i < n_; ++i) {
          wg[i] += static_cast<T>(d * static_cast<double>(row[i]));
        }
        b1_g[static_cast<std::size_t>(hdx)] += static_cast<T>(d);
        if (grad_in != nullptr) {
          T* gi = grad_in->data() + b * n_;
          for (int i = 0; i < n_; ++i) gi[i] += static_cast<T>(d * static_cast<double>(w[i]));
        }
      }
    }
  }

  void zero_grads() {
    std::fill(w1_g.begin(), w1_g.end(), T(0));
    std::fill(b1_g.begin(), b1_g.end(), T(0));
    std::fill(w2_g.begin(), w2_g.end(), T(0));
    std::fill(b2_g.begin(), b2_g.end(), T(0));
  }

  int n_ = 0, hidden_ = 0;
  std::vector<T> w1, b1, w2, b2;
  std::vector<T> w1_g, b1_g, w2_g, b2_g;
};

/// Per-forward activation record for the backward pass.
template <typename T>
struct DenoiserTrace {
  Tensor<T> zt;
  Tensor<T> h0;       // patch embed output [T,C,h,w]
  Tensor<T> temb_sin;  // [time_dim]
  Tensor<T> t1_pre, t1_act;
  Tensor<T> emb;  // final embedding fed to FiLM
  bool conditional = false;
  Tensor<T> style;  // style vector used (for proj gradient)
  AlignCache<T> align_cache;
  struct Block {
    Tensor<T> input;    // [T,C,ntok]
    Tensor<T> after_sp;  // after spatial mixing
    Tensor<T> after_tm;  // after temporal mixing
    Tensor<T> kan_in;    // [T*ntok, C]
    KanCache<T> kan_cache;
    Tensor<T> mlp_pre;  // hidden pre-activation (no-asd variant)
    Tensor<T> res;      // pre-FiLM residual output [T,C,ntok]
    Tensor<T> film_out;  // [2C]
  };
  std::vector<Block> blocks;
  Tensor<T> head_in;  // [T,C,h,w]
};

/// Gradients flowing back into the condition inputs; the caller routes them
/// into the encoder backward passes.
template <typename T>
struct CondGrads {
  bool valid = false;
  Tensor<T> d_depth_embedding;
  Tensor<T> d_style;
};

/// The noise predictor: patch embedding, B mixing blocks with learnable
/// spline (or matched MLP) residual bodies, FiLM timestep modulation, and a
/// transposed-conv head. Immovable so parameter refs stay valid.
template <typename T>
class Denoiser {
 public:
  explicit Denoiser(const ModelDims& dims) : dims_(dims) {
    const std::size_t c = static_cast<std::size_t>(dims.channels);
    const std::size_t p = static_cast<std::size_t>(dims.patch);
    const std::size_t dt = static_cast<std::size_t>(dims.time_dim);
    const std::size_t ntok = static_cast<std::size_t>(dims.tokens());
    const std::size_t tf = static_cast<std::size_t>(dims.frames);
    patch_w_ = Tensor<T>({c, 1, p, p});
    patch_b_ = Tensor<T>({c});
    time_fc1_w_ = Tensor<T>({dt, dt});
    time_fc1_b_ = Tensor<T>({dt});
    time_fc2_w_ = Tensor<T>({dt, dt});
    time_fc2_b_ = Tensor<T>({dt});
    if (dims.use_pda) {
      depth_enc_ = DepthEncoder<T>(dims.depth_mid, dims.channels);
      align_ = AlignmentParams<T>(dims.channels);
      style_enc_ = StyleEncoder<T>(dims.style_mid, dims.style_dim);
      style_proj_w_ = Tensor<T>({dt, static_cast<std::size_t>(dims.style_dim)});
    }
    grid_ = KnotGrid::make_uniform(dims.spline_lo, dims.spline_hi, dims.grid_intervals,
                                   dims.spline_order);
    for (int b = 0; b < dims.blocks; ++b) {
      spatial_w_.emplace_back(std::vector<std::size_t>{ntok, ntok});
      spatial_b_.emplace_back(std::vector<std::size_t>{ntok});
      temporal_w_.emplace_back(std::vector<std::size_t>{tf, tf});
      temporal_b_.emplace_back(std::vector<std::size_t>{tf});
      film_w_.emplace_back(std::vector<std::size_t>{2 * c, dt});
      film_b_.emplace_back(std::vector<std::size_t>{2 * c});
      if (dims.use_asd) {
        kan_blocks_.emplace_back(dims.channels, dims.channels, grid_);
      } else {
        mlp_blocks_.emplace_back(dims.channels, dims.kan_param_target());
      }
    }
    spatial_w_g_.reserve(spatial_w_.size());
    for (auto& w : spatial_w_) spatial_w_g_.emplace_back(w.shape());
    for (auto& b : spatial_b_) spatial_b_g_.emplace_back(b.shape());
    for (auto& w : temporal_w_) temporal_w_g_.emplace_back(w.shape());
    for (auto& b : temporal_b_) temporal_b_g_.emplace_back(b.shape());
    for (auto& w : film_w_) film_w_g_.emplace_back(w.shape());
    for (auto& b : film_b_) film_b_g_.emplace_back(b.shape());
    head_w_ = Tensor<T>({c, 1, p, p});
    head_b_ = Tensor<T>({1});
    patch_w_g_ = Tensor<T>(patch_w_.shape());
    patch_b_g_ = Tensor<T>(patch_b_.shape());
    time_fc1_w_g_ = Tensor<T>(time_fc1_w_.shape());
    time_fc1_b_g_ = Tensor<T>(time_fc1_b_.shape());
    time_fc2_w_g_ = Tensor<T>(time_fc2_w_.shape());
    time_fc2_b_g_ = Tensor<T>(time_fc2_b_.shape());
    if (dims.use_pda) style_proj_w_g_ = Tensor<T>(style_proj_w_.shape());
    head_w_g_ = Tensor<T>(head_w_.shape());
    head_b_g_ = Tensor<T>(head_b_.shape());
    build_registry();
  }

  Denoiser(const Denoiser&) = delete;
  Denoiser& operator=(const Denoiser&) = delete;
  Denoiser(Denoiser&&) = delete;
  Denoiser& operator=(Denoiser&&) = delete;

  const ModelDims& dims() const { return dims_; }
  const KnotGrid& grid() const { return grid_; }
  DepthEncoder<T>& depth_encoder() { return depth_enc_; }
  StyleEncoder<T>& style_encoder() { return style_enc_; }
  AlignmentParams<T>& alignment() { return align_; }

  const std::vector<ParamRef<T>>& params() const { return params_; }
  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    names.reserve(params_.size());
    for (const auto& p : params_) names.push_back(p.name);
    return names;
  }
  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size;
    return n;
  }

  /// Seeded initialization. Each component draws from its own forked stream
  /// so shared components initialize identically across ablation variants.
  void init(std::uint64_t seed) {
    Rng root(seed);
    Rng r = root.fork(1);
    const double patch_scale = 1.0 / dims_.patch;  // 1/sqrt(fan_in), fan_in = patch^2
    for (std::size_t i = 0; i < patch_w_.numel(); ++i) {
      patch_w_[i] = static_cast<T>(r.normal() * patch_scale);
    }
    patch_b_.fill(T(0));
    r = root.fork(2);
    const double ts = 1.0 / std::sqrt(static_cast<double>(dims_.time_dim));
    for (std::size_t i = 0; i < time_fc1_w_.numel(); ++i) {
      time_fc1_w_[i] = static_cast<T>(r.normal() * ts);
    }
    for (std::size_t i = 0; i < time_fc2_w_.numel(); ++i) {
      time_fc2_w_[i] = static_cast<T>(r.normal() * ts);
    }
    time_fc1_b_.fill(T(0));
    time_fc2_b_.fill(T(0));
    if (dims_.use_pda) {
      r = root.fork(3);
      depth_enc_.init(r);
      r = root.fork(4);
      style_enc_.init(r);
      // gamma stays zero: injection starts as an exact no-op
      std::fill(align_.gamma.begin(), align_.gamma.end(), T(0));
      style_proj_w_.fill(T(0));  // zero-init so style is a no-op at injection start
    }
    for (int b = 0; b < dims_.blocks; ++b) {
      r = root.fork(16 + static_cast<std::uint64_t>(b));
      init_mixer(spatial_w_[static_cast<std::size_t>(b)], r);
      spatial_b_[static_cast<std::size_t>(b)].fill(T(0));
      init_mixer(temporal_w_[static_cast<std::size_t>(b)], r);
      temporal_b_[static_cast<std::size_t>(b)].fill(T(0));
      film_w_[static_cast<std::size_t>(b)].fill(T(0));  // FiLM starts as identity
      film_b_[static_cast<std::size_t>(b)].fill(T(0));
      if (dims_.use_asd) {
        KanInit ki;
        ki.unit_base = false;  // w_b ~ N(0,1/n_in): keeps the residual sum zero-mean
        init_kan_layer(kan_blocks_[static_cast<std::size_t>(b)], r, ki);
      } else {
        mlp_blocks_[static_cast<std::size_t>(b)].init(r);
      }
    }
    // zero-init head: the fresh model predicts exactly zero noise
    head_w_.fill(T(0));
    head_b_.fill(T(0));
  }

  Tensor<T> encode_depth(const Tensor<T>& depth, DepthEncoderCache<T>& cache) const {
    if (!dims_.use_pda) fail(ErrorCode::InvalidState, "encode_depth: PDA disabled");
    Tensor<T> zd = depth_enc_.forward(depth, cache);
    // output spatial shape must match the backbone feature map (build contract)
    if (zd.extent(1) != static_cast<std::size_t>(dims_.channels) ||
        zd.extent(2) != static_cast<std::size_t>(dims_.feat_h()) ||
        zd.extent(3) != static_cast<std::size_t>(dims_.feat_w())) {
      fail(ErrorCode::InvalidShape, "encode_depth: embedding does not match feature map");
    }
    return zd;
  }

  Tensor<T> encode_style(const Tensor<T>& frame, StyleEncoderCache<T>& cache) const {
    if (!dims_.use_pda) fail(ErrorCode::InvalidState, "encode_style: PDA disabled");
    return style_enc_.forward(frame, cache);
  }

  ConditionBundle<T> make_condition(const Tensor<T>& depth, const Tensor<T>& first_frame,
                                    DepthEncoderCache<T>& dcache, StyleEncoderCache<T>& scache) {
    ConditionBundle<T> cond;
    cond.is_null = false;
    cond.depth_embedding = encode_depth(depth, dcache);
    cond.style = encode_style(first_frame, scache);
    return cond;
  }

  Tensor<T> predict_noise(const Tensor<T>& zt, const ConditionBundle<T>& cond, int t,
                          DenoiserTrace<T>& trace) {
    if (t < 1) fail(ErrorCode::InvalidTimestep, "predict_noise: t must be >= 1");
    const std::size_t tf = static_cast<std::size_t>(dims_.frames);
    const std::size_t c = static_cast<std::size_t>(dims_.channels);
    const std::size_t ntok = static_cast<std::size_t>(dims_.tokens());
    if (zt.shape() != std::vector<std::size_t>{tf, 1, static_cast<std::size_t>(dims_.height),
                                               static_cast<std::size_t>(dims_.width)}) {
      fail(ErrorCode::InvalidShape, "predict_noise: bad input shape " + shape_string(zt.shape()));
    }
    trace.zt = zt;
    trace.blocks.assign(static_cast<std::size_t>(dims_.blocks), {});

    Tensor<T> h0 = conv2d(zt, patch_w_, dims_.patch, 0);
    DepthEncoder<T>::add_channel_bias(h0, patch_b_);
    trace.h0 = h0;

    trace.temb_sin = sinusoidal_embedding(t);
    trace.t1_pre = linear(time_fc1_w_, time_fc1_b_, trace.temb_sin);
    trace.t1_act = Tensor<T>(trace.t1_pre.shape());
    for (std::size_t i = 0; i < trace.t1_pre.numel(); ++i) {
      trace.t1_act[i] = static_cast<T>(silu(static_cast<double>(trace.t1_pre[i])));
    }
    Tensor<T> emb = linear(time_fc2_w_, time_fc2_b_, trace.t1_act);

    trace.conditional = !cond.is_null && dims_.use_pda;
    Tensor<T> h1 = h0;
    if (trace.conditional) {
      Tensor<T> zhat = align(cond.depth_embedding, h0, align_, &trace.align_cache);
      for (std::size_t i = 0; i < h1.numel(); ++i) h1[i] += zhat[i];
      trace.style = cond.style;
      // style enters through a zero-initialized projection
      for (std::size_t o = 0; o < emb.numel(); ++o) {
        double acc = 0.0;
        const T* w = style_proj_w_.data() + o * static_cast<std::size_t>(dims_.style_dim);
        for (int i = 0; i < dims_.style_dim; ++i) {
          acc += static_cast<double>(w[i]) * static_cast<double>(cond.style[static_cast<std::size_t>(i)]);
        }
        emb[o] += static_cast<T>(acc);
      }
    }
    trace.emb = emb;

    Tensor<T> x = h1.reshaped({tf, c, ntok});
    for (int b = 0; b < dims_.blocks; ++b) {
      auto& blk = trace.blocks[static_cast<std::size_t>(b)];
      blk.input = x;
      blk.after_sp = spatial_forward(x, b);
      blk.after_tm = temporal_forward(blk.after_sp, b);
      blk.kan_in = to_rows(blk.after_tm);
      Tensor<T> body_out;
      if (dims_.use_asd) {
        body_out = kan_blocks_[static_cast<std::size_t>(b)].forward(blk.kan_in, blk.kan_cache);
      } else {
        body_out = mlp_blocks_[static_cast<std::size_t>(b)].forward(blk.kan_in, blk.mlp_pre);
      }
      blk.res = blk.after_tm;
      add_rows(blk.res, body_out);
      blk.film_out = linear(film_w_[static_cast<std::size_t>(b)],
                            film_b_[static_cast<std::size_t>(b)], emb);
      x = film_forward(blk.res, blk.film_out);
    }
    trace.head_in = x.reshaped({tf, c, static_cast<std::size_t>(dims_.feat_h()),
                                static_cast<std::size_t>(dims_.feat_w())});
    Tensor<T> out = conv_transpose2d(trace.head_in, head_w_, dims_.patch);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += head_b_[0];
    out.require_finite("predict_noise");
    return out;
  }

  /// Accumulates parameter gradients; returns the gradients w.r.t. the
  /// condition inputs so the caller can continue into the encoders.
  CondGrads<T> backward(const DenoiserTrace<T>& trace, const Tensor<T>& grad_out) {
    const std::size_t tf = static_cast<std::size_t>(dims_.frames);
    const std::size_t c = static_cast<std::size_t>(dims_.channels);
    const std::size_t ntok = static_cast<std::size_t>(dims_.tokens());

    Tensor<T> d_head_in(trace.head_in.shape());
    conv_transpose2d_backward(trace.head_in, head_w_, dims_.patch, grad_out, d_head_in,
                              head_w_g_);
    {
      double acc = 0.0;
      for (std::size_t i = 0; i < grad_out.numel(); ++i) {
        acc += static_cast<double>(grad_out[i]);
      }
      head_b_g_[0] += static_cast<T>(acc);
    }

    Tensor<T> gx = d_head_in.reshaped({tf, c, ntok});
    Tensor<T> d_emb({static_cast<std::size_t>(dims_.time_dim)});
    for (int b = dims_.blocks - 1; b >= 0; --b) {
      const auto& blk = trace.blocks[static_cast<std::size_t>(b)];
      Tensor<T> d_res = film_backward(gx, blk, trace.emb, b, d_emb);
      // residual: d flows both directly and through the body
      Tensor<T> d_body = to_rows(d_res);
      Tensor<T> d_body_in(d_body.shape());
      if (dims_.use_asd) {
        kan_blocks_[static_cast<std::size_t>(b)].backward(blk.kan_cache, d_body, &d_body_in);
      } else {
        mlp_blocks_[static_cast<std::size_t>(b)].backward(blk.kan_in, blk.mlp_pre, d_body,
                                                          &d_body_in);
      }
      Tensor<T> d_tm = d_res;
      add_from_rows(d_tm, d_body_in);
      Tensor<T> d_sp = temporal_backward(d_tm, blk, b);
      gx = spatial_backward(d_sp, blk, b);
    }

    CondGrads<T> cond_grads;
    if (trace.conditional) {
      cond_grads.valid = true;
      Tensor<T> d_h1 = gx.reshaped(trace.h0.shape());
      cond_grads.d_depth_embedding = align_backward(trace.align_cache, d_h1, align_);
      // style projection
      cond_grads.d_style = Tensor<T>({static_cast<std::size_t>(dims_.style_dim)});
      for (std::size_t o = 0; o < d_emb.numel(); ++o) {
        const double g = static_cast<double>(d_emb[o]);
        T* wg = style_proj_w_g_.data() + o * static_cast<std::size_t>(dims_.style_dim);
        const T* w = style_proj_w_.data() + o * static_cast<std::size_t>(dims_.style_dim);
        for (int i = 0; i < dims_.style_dim; ++i) {
          wg[i] += static_cast<T>(g * static_cast<double>(trace.style[static_cast<std::size_t>(i)]));
          cond_grads.d_style[static_cast<std::size_t>(i)] +=
              static_cast<T>(g * static_cast<double>(w[i]));
        }
      }
    }

    // timestep MLP
    Tensor<T> d_t1_act = linear_backward(time_fc2_w_, time_fc2_w_g_, time_fc2_b_g_,
                                         trace.t1_act, d_emb);
    for (std::size_t i = 0; i < d_t1_act.numel(); ++i) {
      d_t1_act[i] = static_cast<T>(static_cast<double>(d_t1_act[i]) *
                                   silu_grad(static_cast<double>(trace.t1_pre[i])));
    }
    linear_backward(time_fc1_w_, time_fc1_w_g_, time_fc1_b_g_, trace.temb_sin, d_t1_act);

    // patch embedding (input gradient is discarded)
    Tensor<T> d_h0 = gx.reshaped(trace.h0.shape());
    Tensor<T> d_zt(trace.zt.shape());
    conv2d_backward(trace.zt, patch_w_, dims_.patch, 0, d_h0, d_zt, patch_w_g_);
    DepthEncoder<T>::accumulate_channel_bias_grad(d_h0, patch_b_g_);
    return cond_grads;
  }

  void zero_grads() {
    for (auto& p : params_) std::fill(p.grad, p.grad + p.size, T(0));
  }

  /// Copies parameter values from another instance with an identical layout.
  template <typename U>
  void copy_params_from(const Denoiser<U>& other) {
    const auto& src = other.params();
    if (src.size() != params_.size()) {
      fail(ErrorCode::InvalidState, "copy_params_from: layout mismatch");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (src[i].name != params_[i].name || src[i].size != params_[i].size) {
        fail(ErrorCode::InvalidState, "copy_params_from: layout mismatch at " + src[i].name);
      }
      for (std::size_t k = 0; k < params_[i].size; ++k) {
        params_[i].value[k] = static_cast<T>(src[i].value[k]);
      }
    }
  }

 private:
  void init_mixer(Tensor<T>& w, Rng& rng) {
    // near-identity token mixing keeps feature scales stable through depth
    const std::size_t n = w.extent(0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        w[i * n + j] = static_cast<T>((i == j ? 1.0 : 0.0) + 0.02 * rng.normal());
      }
    }
  }

  Tensor<T> sinusoidal_embedding(int t) const {
    const int dim = dims_.time_dim;
    const int half = dim / 2;
    Tensor<T> out({static_cast<std::size_t>(dim)});
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
      const double a = static_cast<double>(t) * freq;
      out[static_cast<std::size_t>(i)] = static_cast<T>(std::sin(a));
      out[static_cast<std::size_t>(half + i)] = static_cast<T>(std::cos(a));
    }
    return out;
  }

  static Tensor<T> linear(const Tensor<T>& w, const Tensor<T>& b, const Tensor<T>& x) {
    const std::size_t out_n = w.extent(0), in_n = w.extent(1);
    Tensor<T> y({out_n});
    for (std::size_t o = 0; o < out_n; ++o) {
      double acc = static_cast<double>(b[o]);
      const T* row = w.data() + o * in_n;
      for (std::size_t i = 0; i < in_n; ++i) {
        acc += static_cast<double>(row[i]) * static_cast<double>(x[i]);
      }
      y[o] = static_cast<T>(acc);
    }
    return y;
  }

  static Tensor<T> linear_backward(const Tensor<T>& w, Tensor<T>& w_g, Tensor<T>& b_g,
                                   const Tensor<T>& x, const Tensor<T>& d_out) {
    const std::size_t out_n = w.extent(0), in_n = w.extent(1);
    Tensor<T> d_x({in_n});
    for (std::size_t o = 0; o < out_n; ++o) {
      const double g = static_cast<double>(d_out[o]);
      b_g[o] += static_cast<T>(g);
      const T* row = w.data() + o * in_n;
      T* growp = w_g.data() + o * in_n;
      for (std::size_t i = 0; i < in_n; ++i) {
        growp[i] += static_cast<T>(g * static_cast<double>(x[i]));
        d_x[i] += static_cast<T>(g * static_cast<double>(row[i]));
      }
    }
    return d_x;
  }

  // spatial mixing: y[f,c,u] = sum_v W[u,v] x[f,c,v] + b[u]
  Tensor<T> spatial_forward(const Tensor<T>& x, int b) const {
    const Tensor<T>& w = spatial_w_[static_cast<std::size_t>(b)];
    const Tensor<T>& bias = spatial_b_[static_cast<std::size_t>(b)];
    const std::size_t tf = x.extent(0), c = x.extent(1), ntok = x.extent(2);
    Tensor<T> y(x.shape());
    for (std::size_t f = 0; f < tf; ++f) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* row = x.data() + (f * c + ci) * ntok;
        T* orow = y.data() + (f * c + ci) * ntok;
        for (std::size_t u = 0; u < ntok; ++u) {
          const T* wrow = w.data() + u * ntok;
          double acc = static_cast<double>(bias[u]);
          for (std::size_t v = 0; v < ntok; ++v) {
            acc += static_cast<double>(wrow[v]) * static_cast<double>(row[v]);
          }
          orow[u] = static_cast<T>(acc);
        }
      }
    }
    return y;
  }

  Tensor<T> spatial_backward(const Tensor<T>& d_y, const typename DenoiserTrace<T>::Block& blk,
                             int b) {
    const Tensor<T>& w = spatial_w_[static_cast<std::size_t>(b)];
    Tensor<T>& w_g = spatial_w_g_[static_cast<std::size_t>(b)];
    Tensor<T>& b_g = spatial_b_g_[static_cast<std::size_t>(b)];
    const Tensor<T>& x = blk.input;
    const std::size_t tf = x.extent(0), c = x.extent(1), ntok = x.extent(2);
    Tensor<T> d_x(x.shape());
    for (std::size_t f = 0; f < tf; ++f) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* xrow = x.data() + (f * c + ci) * ntok;
        const T* grow = d_y.data() + (f * c + ci) * ntok;
        T* dxrow = d_x.data() + (f * c + ci) * ntok;
        for (std::size_t u = 0; u < ntok; ++u) {
          const double g = static_cast<double>(grow[u]);
          if (g == 0.0) continue;
          b_g[u] += static_cast<T>(g);
          const T* wrow = w.data() + u * ntok;
          T* wgrow = w_g.data() + u * ntok;
          for (std::size_t v = 0; v < ntok; ++v) {
            wgrow[v] += static_cast<T>(g * static_cast<double>(xrow[v]));
            dxrow[v] += static_cast<T>(g * static_cast<double>(wrow[v]));
          }
        }
      }
    }
    return d_x;
  }

  // temporal mixing: y[f,c,u] = sum_g W[f,g] x[g,c,u] + b[f]
  Tensor<T> temporal_forward(const Tensor<T>& x, int b) const {
    const Tensor<T>& w = temporal_w_[static_cast<std::size_t>(b)];
    const Tensor<T>& bias = temporal_b_[static_cast<std::size_t>(b)];
    const std::size_t tf = x.extent(0), c = x.extent(1), ntok = x.extent(2);
    const std::size_t plane = c * ntok;
    Tensor<T> y(x.shape());
    for (std::size_t f = 0; f < tf; ++f) {
      T* orow = y.data() + f * plane;
      const T* wrow = w.data() + f * tf;
      for (std::size_t i = 0; i < plane; ++i) {
        double acc = static_cast<double>(bias[f]);
        for (std::size_t g = 0; g < tf; ++g) {
          acc += static_cast<double>(wrow[g]) * static_cast<double>(x[g * plane + i]);
        }
        orow[i] = static_cast<T>(acc);
      }
    }
    return y;
  }

  Tensor<T> temporal_backward(const Tensor<T>& d_y, const typename DenoiserTrace<T>::Block& blk,
                              int b) {
    const Tensor<T>& w = temporal_w_[static_cast<std::size_t>(b)];
    Tensor<T>& w_g = temporal_w_g_[static_cast<std::size_t>(b)];
    Tensor<T>& b_g = temporal_b_g_[static_cast<std::size_t>(b)];
    const Tensor<T>& x = blk.after_sp;
    const std::size_t tf = x.extent(0), c = x.extent(1), ntok = x.extent(2);
    const std::size_t plane = c * ntok;
    Tensor<T> d_x(x.shape());
    for (std::size_t f = 0; f < tf; ++f) {
      const T* grow = d_y.data() + f * plane;
      const T* wrow = w.data() + f * tf;
      T* wgrow = w_g.data() + f * tf;
      double bacc = 0.0;
      for (std::size_t g = 0; g < tf; ++g) {
        double wacc = 0.0;
        const T* xrow = x.data() + g * plane;
        T* dxrow = d_x.data() + g * plane;
        const double wv = static_cast<double>(wrow[g]);
        for (std::size_t i = 0; i < plane; ++i) {
          const double gv = static_cast<double>(grow[i]);
          wacc += gv * static_cast<double>(xrow[i]);
          dxrow[i] += static_cast<T>(gv * wv);
        }
        wgrow[g] += static_cast<T>(wacc);
      }
      for (std::size_t i = 0; i < plane; ++i) bacc += static_cast<double>(grow[i]);
      b_g[f] += static_cast<T>(bacc);
    }
    return d_x;
  }

  // FiLM: y[f,c,u] = res[f,c,u] * (1 + scale[c]) + shift[c]
  Tensor<T> film_forward(const Tensor<T>& res, const Tensor<T>& film_out) const {
    const std::size_t tf = res.extent(0), c = res.extent(1), ntok = res.extent(2);
    Tensor<T> y(res.shape());
    for (std::size_t f = 0; f < tf; ++f) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double s = 1.0 + static_cast<double>(film_out[ci]);
        const double sh = static_cast<double>(film_out[c + ci]);
        const T* r = res.data() + (f * c + ci) * ntok;
        T* o = y.data() + (f * c + ci) * ntok;
        for (std::size_t u = 0; u < ntok; ++u) {
          o[u] = static_cast<T>(static_cast<double>(r[u]) * s + sh);
        }
      }
    }
    return y;
  }

  Tensor<T> film_backward(const Tensor<T>& d_y, const typename DenoiserTrace<T>::Block& blk,
                          const Tensor<T>& emb, int b, Tensor<T>& d_emb) {
    const std::size_t tf = d_y.extent(0), c = d_y.extent(1), ntok = d_y.extent(2);
    Tensor<T> d_res(d_y.shape());
    Tensor<T> d_film({2 * c});
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double s = 1.0 + static_cast<double>(blk.film_out[ci]);
      double dscale = 0.0, dshift = 0.0;
      for (std::size_t f = 0; f < tf; ++f) {
        const T* g = d_y.data() + (f * c + ci) * ntok;
        const T* r = blk.res.data() + (f * c + ci) * ntok;
        T* dr = d_res.data() + (f * c + ci) * ntok;
        for (std::size_t u = 0; u < ntok; ++u) {
          const double gv = static_cast<double>(g[u]);
          dr[u] = static_cast<T>(gv * s);
          dscale += gv * static_cast<double>(r[u]);
          dshift += gv;
        }
      }
      d_film[ci] = static_cast<T>(dscale);
      d_film[c + ci] = static_cast<T>(dshift);
    }
    Tensor<T> d_emb_part =
        linear_backward(film_w_[static_cast<std::size_t>(b)],
                        film_w_g_[static_cast<std::size_t>(b)],
                        film_b_g_[static_cast<std::size_t>(b)], emb, d_film);
    for (std::size_t i = 0; i < d_emb.numel(); ++i) d_emb[i] += d_emb_part[i];
    return d_res;
  }

  // [T,C,ntok] <-> rows [(T*ntok), C]
  Tensor<T> to_rows(const Tensor<T>& x) const {
    const std::size_t tf = x.extent(0), c = x.extent(1), ntok = x.extent(2);
    Tensor<T> rows({tf * ntok, c});
    for (std::size_t f = 0; f < tf; ++f) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* p = x.data() + (f * c + ci) * ntok;
        for (std::size_t u = 0; u < ntok; ++u) {
          rows[(f * ntok + u) * c + ci] = p[u];
        }
      }
    }
    return rows;
  }

  void add_rows(Tensor<T>& x, const Tensor<T>& rows) const {
    const std::size_t tf = x.extent(0), c = x.extent(1), ntok = x.extent(2);
    for (std::size_t f = 0; f < tf; ++f) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        T* p = x.data() + (f * c + ci) * ntok;
        for (std::size_t u = 0; u < ntok; ++u) {
          p[u] += rows[(f * ntok + u) * c + ci];
        }
      }
    }
  }

  void add_from_rows(Tensor<T>& x, const Tensor<T>& rows) const { add_rows(x, rows); }

  void build_registry();

  ModelDims dims_;
  KnotGrid grid_;

  Tensor<T> patch_w_, patch_b_;
  Tensor<T> time_fc1_w_, time_fc1_b_, time_fc2_w_, time_fc2_b_;
  DepthEncoder<T> depth_enc_;
  AlignmentParams<T> align_{0};
  StyleEncoder<T> style_enc_;
  Tensor<T> style_proj_w_;
  std::vector<Tensor<T>> spatial_w_, spatial_b_, temporal_w_, temporal_b_, film_w_, film_b_;
  std::vector<KanLayer<T>> kan_blocks_;
  std::vector<MlpBlock<T>> mlp_blocks_;
  Tensor<T> head_w_, head_b_;

  Tensor<T> patch_w_g_, patch_b_g_;
  Tensor<T> time_fc1_w_g_, time_fc1_b_g_, time_fc2_w_g_, time_fc2_b_g_;
  Tensor<T> style_proj_w_g_;
  std::vector<Tensor<T>> spatial_w_g_, spatial_b_g_, temporal_w_g_, temporal_b_g_, film_w_g_,
      film_b_g_;
  Tensor<T> head_w_g_, head_b_g_;

  std::vector<ParamRef<T>> params_;
};

template <typename T>
void Denoiser<T>::build_registry() {
  params_.clear();
  auto add = [this](const std::string& name, Tensor<T>& value, Tensor<T>& grad) {
    params_.push_back(ParamRef<T>{name, value.shape(), value.data(), grad.data(), value.numel()});
  };
  add("patch_embed.weight", patch_w_, patch_w_g_);
  add("patch_embed.bias", patch_b_, patch_b_g_);
  add("time.fc1.weight", time_fc1_w_, time_fc1_w_g_);
  add("time.fc1.bias", time_fc1_b_, time_fc1_b_g_);
  add("time.fc2.weight", time_fc2_w_, time_fc2_w_g_);
  add("time.fc2.bias", time_fc2_b_, time_fc2_b_g_);
  if (dims_.use_pda) {
    add("depth_encoder.conv1.weight", depth_enc_.w1, depth_enc_.w1_g);
    add("depth_encoder.conv1.bias", depth_enc_.b1, depth_enc_.b1_g);
    add("depth_encoder.conv2.weight", depth_enc_.w2, depth_enc_.w2_g);
    add("depth_encoder.conv2.bias", depth_enc_.b2, depth_enc_.b2_g);
    params_.push_back(ParamRef<T>{"align.gamma",
                                  {align_.gamma.size()},
                                  align_.gamma.data(),
                                  align_.gamma_grad.data(),
                                  align_.gamma.size()});
    add("style.conv1.weight", style_enc_.w1, style_enc_.w1_g);
    add("style.conv1.bias", style_enc_.b1, style_enc_.b1_g);
    add("style.conv2.weight", style_enc_.w2, style_enc_.w2_g);
    add("style.conv2.bias", style_enc_.b2, style_enc_.b2_g);
    add("style.proj.weight", style_proj_w_, style_proj_w_g_);
  }
  for (int b = 0; b < dims_.blocks; ++b) {
    const std::string bp = "block" + std::to_string(b);
    const std::string lp = "asd.layer" + std::to_string(b);
    add(bp + ".spatial.weight", spatial_w_[static_cast<std::size_t>(b)],
        spatial_w_g_[static_cast<std::size_t>(b)]);
    add(bp + ".spatial.bias", spatial_b_[static_cast<std::size_t>(b)],
        spatial_b_g_[static_cast<std::size_t>(b)]);
    add(bp + ".temporal.weight", temporal_w_[static_cast<std::size_t>(b)],
        temporal_w_g_[static_cast<std::size_t>(b)]);
    add(bp + ".temporal.bias", temporal_b_[static_cast<std::size_t>(b)],
        temporal_b_g_[static_cast<std::size_t>(b)]);
    if (dims_.use_asd) {
      KanLayer<T>& layer = kan_blocks_[static_cast<std::size_t>(b)];
      const std::size_t nb = layer.nb();
      for (int j = 0; j < layer.n_out(); ++j) {
        for (int p = 0; p < layer.n_in(); ++p) {
          const std::string ep = lp + ".edge" + std::to_string(j) + "." + std::to_string(p);
          params_.push_back(
              ParamRef<T>{ep + ".c", {nb}, layer.coef(j, p), layer.coef_grad(j, p), nb});
          params_.push_back(ParamRef<T>{
              ep + ".wb", {1}, &layer.base_w(j, p), &layer.base_w_grad(j, p), 1});
          params_.push_back(ParamRef<T>{
              ep + ".ws", {1}, &layer.spline_w(j, p), &layer.spline_w_grad(j, p), 1});
        }
      }
    } else {
      MlpBlock<T>& mlp = mlp_blocks_[static_cast<std::size_t>(b)];
      const std::size_t n = static_cast<std::size_t>(mlp.n_);
      const std::size_t hid = static_cast<std::size_t>(mlp.hidden_);
      params_.push_back(ParamRef<T>{lp + ".mlp.w1", {hid, n}, mlp.w1.data(), mlp.w1_g.data(),
                                    mlp.w1.size()});
      params_.push_back(
          ParamRef<T>{lp + ".mlp.b1", {hid}, mlp.b1.data(), mlp.b1_g.data(), mlp.b1.size()});
      params_.push_back(ParamRef<T>{lp + ".mlp.w2", {n, hid}, mlp.w2.data(), mlp.w2_g.data(),
                                    mlp.w2.size()});
      params_.push_back(
          ParamRef<T>{lp + ".mlp.b2", {n}, mlp.b2.data(), mlp.b2_g.data(), mlp.b2.size()});
    }
    add(bp + ".film.weight", film_w_[static_cast<std::size_t>(b)],
        film_w_g_[static_cast<std::size_t>(b)]);
    add(bp + ".film.bias", film_b_[static_cast<std::size_t>(b)],
        film_b_g_[static_cast<std::size_t>(b)]);
  }
  add("head.weight", head_w_, head_w_g_);
  add("head.bias", head_b_, head_b_g_);
  if (param_count() > 200000) {
    fail(ErrorCode::InvalidParams, "model exceeds the 200k parameter budget");
  }
}

}  // namespace splinediff
