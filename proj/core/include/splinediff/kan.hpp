#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splinediff/bspline.hpp"
#include "splinediff/rng.hpp"
#include "splinediff/tensor.hpp"

namespace splinediff {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

/// d/dx silu = sigma(x) * (1 + x * (1 - sigma(x)))
inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

/// One learnable edge activation: phi(x) = w_b * silu(x) + w_s * sum_i c_i B_i(x).
template <typename T>
struct SplineEdgeView {
  std::span<const T> coef;  // G+k spline coefficients
  T base_w;
  T spline_w;
};

template <typename T>
double phi_eval(const SplineEdgeView<T>& edge, const KnotGrid& grid, double x) {
  if (std::isnan(x)) fail(ErrorCode::InvalidInput, "phi_eval: NaN input");
  if (!std::isfinite(static_cast<double>(edge.base_w)) ||
      !std::isfinite(static_cast<double>(edge.spline_w))) {
    fail(ErrorCode::InvalidState, "phi_eval: non-finite edge weight");
  }
  double window[kMaxSplineOrder + 1];
  const int first = basis_window(grid, x, window);
  double spline = 0.0;
  for (int r = 0; r <= grid.order; ++r) {
    const double c = static_cast<double>(edge.coef[static_cast<std::size_t>(first + r)]);
    if (!std::isfinite(c)) fail(ErrorCode::InvalidState, "phi_eval: non-finite coefficient");
    spline += c * window[r];
  }
  return static_cast<double>(edge.base_w) * silu(x) +
         static_cast<double>(edge.spline_w) * spline;
}

/// d phi / dx. The spline part vanishes outside the clamped domain.
template <typename T>
double phi_grad_x(const SplineEdgeView<T>& edge, const KnotGrid& grid, double x) {
  double window[kMaxSplineOrder + 1];
  const int first = basis_deriv_window(grid, x, window);
  double dspline = 0.0;
  for (int r = 0; r <= grid.order; ++r) {
    dspline += static_cast<double>(edge.coef[static_cast<std::size_t>(first + r)]) * window[r];
  }
  return static_cast<double>(edge.base_w) * silu_grad(x) +
         static_cast<double>(edge.spline_w) * dspline;
}

template <typename T>
struct KanCache {
  Tensor<T> input;  // [batch, n_in], retained for the analytic backward
  std::uint64_t serial = 0;
};

/// A full layer of edge activations: out_j = sum_p phi_{j,p}(x_p), no bias.
/// Parameters are stored contiguously per edge so each edge can be exposed as
/// its own named tensor.
template <typename T>
class KanLayer {
 public:
  KanLayer() = default;

  KanLayer(int n_in, int n_out, KnotGrid grid)
      : n_in_(n_in), n_out_(n_out), grid_(std::move(grid)) {
    const std::size_t edges = static_cast<std::size_t>(n_in_) * n_out_;
    coef_.assign(edges * nb(), T(0));
    base_w_.assign(edges, T(1));
    spline_w_.assign(edges, T(1));
    coef_g_.assign(coef_.size(), T(0));
    base_w_g_.assign(base_w_.size(), T(0));
    spline_w_g_.assign(spline_w_.size(), T(0));
  }

  int n_in() const { return n_in_; }
  int n_out() const { return n_out_; }
  std::size_t nb() const { return static_cast<std::size_t>(grid_.basis_count()); }
  const KnotGrid& grid() const { return grid_; }

  // Edge (j = output, p = input) parameter storage, contiguous per edge.
  T* coef(int j, int p) { return coef_.data() + edge_index(j, p) * nb(); }
  const T* coef(int j, int p) const { return coef_.data() + edge_index(j, p) * nb(); }
  T& base_w(int j, int p) { return base_w_[edge_index(j, p)]; }
  T& spline_w(int j, int p) { return spline_w_[edge_index(j, p)]; }
  T* coef_grad(int j, int p) { return coef_g_.data() + edge_index(j, p) * nb(); }
  T& base_w_grad(int j, int p) { return base_w_g_[edge_index(j, p)]; }
  T& spline_w_grad(int j, int p) { return spline_w_g_[edge_index(j, p)]; }

  SplineEdgeView<T> edge(int j, int p) const {
    return {std::span<const T>(coef(j, p), nb()), base_w_[edge_index(j, p)],
            spline_w_[edge_index(j, p)]};
  }

  Tensor<T> forward(const Tensor<T>& x, KanCache<T>& cache) {
    if (x.ndim() != 2 || x.extent(1) != static_cast<std::size_t>(n_in_)) {
      fail(ErrorCode::InvalidShape, "KanLayer: input width mismatch");
    }
    cache.input = x;
    cache.serial = ++serial_;
    const std::size_t batch = x.extent(0);
    Tensor<T> out({batch, static_cast<std::size_t>(n_out_)});
    const int k = grid_.order;
    std::vector<double> bval(static_cast<std::size_t>(n_in_) * (k + 1));
    std::vector<int> first(static_cast<std::size_t>(n_in_));
    std::vector<double> base(static_cast<std::size_t>(n_in_));
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = x.data() + b * n_in_;
      for (int p = 0; p < n_in_; ++p) {
        const double xp = static_cast<double>(row[p]);
        first[p] = basis_window(grid_, xp, &bval[static_cast<std::size_t>(p) * (k + 1)]);
        base[p] = silu(xp);
      }
      T* orow = out.data() + b * n_out_;
      for (int j = 0; j < n_out_; ++j) {
        const T* wb = base_w_.data() + static_cast<std::size_t>(j) * n_in_;
        const T* ws = spline_w_.data() + static_cast<std::size_t>(j) * n_in_;
        double acc = 0.0;
        for (int p = 0; p < n_in_; ++p) {
          const T* c = coef(j, p) + first[p];
          const double* bv = &bval[static_cast<std::size_t>(p) * (k + 1)];
          double spline = 0.0;
          for (int r = 0; r <= k; ++r) spline += static_cast<double>(c[r]) * bv[r];
          acc += static_cast<double>(wb[p]) * base[p] + static_cast<double>(ws[p]) * spline;
        }
        orow[j] = static_cast<T>(acc);
      }
    }
    out.require_finite("KanLayer forward");
    return out;
  }

  /// Accumulates parameter gradients (fixed batch order) and, when grad_in is
  /// non-null, writes the exact input gradient.
  void backward(const KanCache<T>& cache, const Tensor<T>& grad_out, Tensor<T>* grad_in) {
    if (cache.serial != serial_) {
      fail(ErrorCode::InvalidState, "KanLayer: stale cache (forward/backward mismatch)");
    }
    const Tensor<T>& x = cache.input;
    const std::size_t batch = x.extent(0);
    if (grad_out.ndim() != 2 || grad_out.extent(0) != batch ||
        grad_out.extent(1) != static_cast<std::size_t>(n_out_)) {
      fail(ErrorCode::InvalidShape, "KanLayer backward: grad_out shape mismatch");
    }
    if (grad_in != nullptr && !grad_in->same_shape(x)) {
      fail(ErrorCode::InvalidShape, "KanLayer backward: grad_in shape mismatch");
    }
    const int k = grid_.order;
    std::vector<double> bval(static_cast<std::size_t>(n_in_) * (k + 1));
    std::vector<double> dval(static_cast<std::size_t>(n_in_) * (k + 1));
    std::vector<int> first(static_cast<std::size_t>(n_in_));
    std::vector<double> base(static_cast<std::size_t>(n_in_));
    std::vector<double> dbase(static_cast<std::size_t>(n_in_));
    std::vector<double> gx(static_cast<std::size_t>(n_in_));
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = x.data() + b * n_in_;
      for (int p = 0; p < n_in_; ++p) {
        const double xp = static_cast<double>(row[p]);
        first[p] = basis_window(grid_, xp, &bval[static_cast<std::size_t>(p) * (k + 1)]);
        basis_deriv_window(grid_, xp, &dval[static_cast<std::size_t>(p) * (k + 1)]);
        base[p] = silu(xp);
        dbase[p] = silu_grad(xp);
        gx[p] = 0.0;
      }
      const T* grow = grad_out.data() + b * n_out_;
      for (int j = 0; j < n_out_; ++j) {
        const double g = static_cast<double>(grow[j]);
        if (g == 0.0) continue;
        const std::size_t e0 = static_cast<std::size_t>(j) * n_in_;
        for (int p = 0; p < n_in_; ++p) {
          const std::size_t e = e0 + p;
          T* cg = coef_g_.data() + e * nb() + first[p];
          const T* c = coef_.data() + e * nb() + first[p];
          const double* bv = &bval[static_cast<std::size_t>(p) * (k + 1)];
          const double* dv = &dval[static_cast<std::size_t>(p) * (k + 1)];
          const double ws = static_cast<double>(spline_w_[e]);
          double spline = 0.0, dspline = 0.0;
          for (int r = 0; r <= k; ++r) {
            const double cr = static_cast<double>(c[r]);
            spline += cr * bv[r];
            dspline += cr * dv[r];
            cg[r] += static_cast<T>(g * ws * bv[r]);
          }
          base_w_g_[e] += static_cast<T>(g * base[p]);
          spline_w_g_[e] += static_cast<T>(g * spline);
          gx[p] += g * (static_cast<double>(base_w_[e]) * dbase[p] + ws * dspline);
        }
      }
      if (grad_in != nullptr) {
        T* girow = grad_in->data() + b * n_in_;
        for (int p = 0; p < n_in_; ++p) girow[p] = static_cast<T>(gx[p]);
      }
    }
  }

  void zero_grads() {
    std::fill(coef_g_.begin(), coef_g_.end(), T(0));
    std::fill(base_w_g_.begin(), base_w_g_.end(), T(0));
    std::fill(spline_w_g_.begin(), spline_w_g_.end(), T(0));
  }

  std::size_t param_count() const {
    return coef_.size() + base_w_.size() + spline_w_.size();
  }

 private:
  std::size_t edge_index(int j, int p) const {
    return static_cast<std::size_t>(j) * n_in_ + p;
  }

  int n_in_ = 0;
  int n_out_ = 0;
  KnotGrid grid_;
  std::vector<T> coef_, base_w_, spline_w_;
  std::vector<T> coef_g_, base_w_g_, spline_w_g_;
  std::uint64_t serial_ = 0;
};

template <typename T>
struct KanNetwork {
  std::vector<KanLayer<T>> layers;
};

template <typename T>
struct KanNetworkCache {
  std::vector<KanCache<T>> layer_caches;
};

struct KanInit {
  double coef_sigma = 0.1;   // c_i ~ N(0, coef_sigma^2) / n_in
  bool unit_base = true;     // w_b = 1; otherwise w_b ~ N(0, 1/n_in)
};

template <typename T>
void init_kan_layer(KanLayer<T>& layer, Rng& rng, const KanInit& init = {}) {
  const int n_in = layer.n_in();
  for (int j = 0; j < layer.n_out(); ++j) {
    for (int p = 0; p < n_in; ++p) {
      T* c = layer.coef(j, p);
      for (std::size_t i = 0; i < layer.nb(); ++i) {
        c[i] = static_cast<T>(rng.normal() * init.coef_sigma / n_in);
      }
      layer.base_w(j, p) =
          init.unit_base ? T(1) : static_cast<T>(rng.normal() / std::sqrt(double(n_in)));
      layer.spline_w(j, p) = T(1);
    }
  }
}

/// Builds a network of the given widths with the near-SiLU start: w_b = 1,
/// w_s = 1, c_i ~ N(0, 0.1^2)/n_in.
template <typename T>
KanNetwork<T> init_kan(Rng& rng, const std::vector<int>& widths, const KnotGrid& grid,
                       const KanInit& init = {}) {
  if (widths.size() < 2) fail(ErrorCode::InvalidParams, "init_kan: need at least 2 widths");
  KanNetwork<T> net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    net.layers.emplace_back(widths[l], widths[l + 1], grid);
    init_kan_layer(net.layers.back(), rng, init);
  }
  return net;
}

template <typename T>
Tensor<T> kan_forward(KanNetwork<T>& net, const Tensor<T>& input, KanNetworkCache<T>& cache) {
  cache.layer_caches.resize(net.layers.size());
  Tensor<T> h = input;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    h = net.layers[l].forward(h, cache.layer_caches[l]);
  }
  return h;
}

/// Returns the input gradient; parameter gradients accumulate in the layers.
template <typename T>
Tensor<T> kan_backward(KanNetwork<T>& net, const KanNetworkCache<T>& cache,
                       const Tensor<T>& grad_out) {
  if (cache.layer_caches.size() != net.layers.size()) {
    fail(ErrorCode::InvalidState, "kan_backward: cache does not match network");
  }
  Tensor<T> g = grad_out;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    Tensor<T> gin(cache.layer_caches[l].input.shape());
    net.layers[l].backward(cache.layer_caches[l], g, &gin);
    g = std::move(gin);
  }
  return g;
}

}  // namespace splinediff
