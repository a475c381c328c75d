#pragma once

#include "splinediff/tensor.hpp"

namespace splinediff {

// Direct 2-D cross-correlation on [N,C,H,W] tensors with a paired analytic
// backward. Instances in this project are tiny (16x16 inputs, k<=4), so no
// im2col or FFT path is provided.

inline std::size_t conv_out_extent(std::size_t in, int k, int stride, int pad) {
  return (in + 2 * static_cast<std::size_t>(pad) - static_cast<std::size_t>(k)) /
             static_cast<std::size_t>(stride) +
         1;
}

template <typename T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& kernel, int stride, int pad) {
  if (input.ndim() != 4 || kernel.ndim() != 4) {
    fail(ErrorCode::InvalidShape, "conv2d: expected 4-d input and kernel");
  }
  if (stride < 1) fail(ErrorCode::InvalidShape, "conv2d: stride must be >= 1");
  if (pad < 0) fail(ErrorCode::InvalidShape, "conv2d: pad must be >= 0");
  if (kernel.extent(2) != kernel.extent(3)) {
    fail(ErrorCode::InvalidShape, "conv2d: kernel must be square");
  }
  if (input.extent(1) != kernel.extent(1)) {
    fail(ErrorCode::InvalidShape, "conv2d: channel mismatch " + shape_string(input.shape()) +
                                      " vs " + shape_string(kernel.shape()));
  }
  std::size_t k = kernel.extent(2);
  if (k > input.extent(2) + 2 * static_cast<std::size_t>(pad) ||
      k > input.extent(3) + 2 * static_cast<std::size_t>(pad)) {
    fail(ErrorCode::InvalidShape, "conv2d: kernel larger than padded input");
  }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride, int pad) {
  check_conv_args(input, kernel, stride, pad);
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  const std::size_t f = kernel.extent(0), k = kernel.extent(2);
  const std::size_t oh = conv_out_extent(h, static_cast<int>(k), stride, pad);
  const std::size_t ow = conv_out_extent(w, static_cast<int>(k), stride, pad);
  Tensor<T> out({n, f, oh, ow});
  const T* in = input.data();
  const T* ker = kernel.data();
  T* o = out.data();
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t fi = 0; fi < f; ++fi) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          const long y0 = static_cast<long>(oy) * stride - pad;
          const long x0 = static_cast<long>(ox) * stride - pad;
          for (std::size_t ci = 0; ci < c; ++ci) {
            const T* inp = in + ((ni * c + ci) * h) * w;
            const T* kp = ker + ((fi * c + ci) * k) * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long y = y0 + static_cast<long>(ky);
              if (y < 0 || y >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long x = x0 + static_cast<long>(kx);
                if (x < 0 || x >= static_cast<long>(w)) continue;
                acc += static_cast<double>(inp[y * static_cast<long>(w) + x]) *
                       static_cast<double>(kp[ky * k + kx]);
              }
            }
          }
          o[((ni * f + fi) * oh + oy) * ow + ox] = static_cast<T>(acc);
        }
      }
    }
  }
  out.require_finite("conv2d");
  return out;
}

/// Accumulates exact gradients w.r.t. input and kernel into the provided
/// buffers (callers zero them once per batch).
template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, int stride, int pad,
                     const Tensor<T>& grad_out, Tensor<T>& grad_input, Tensor<T>& grad_kernel) {
  check_conv_args(input, kernel, stride, pad);
  if (!grad_input.same_shape(input) || !grad_kernel.same_shape(kernel)) {
    fail(ErrorCode::InvalidShape, "conv2d_backward: gradient buffer shape mismatch");
  }
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  const std::size_t f = kernel.extent(0), k = kernel.extent(2);
  const std::size_t oh = conv_out_extent(h, static_cast<int>(k), stride, pad);
  const std::size_t ow = conv_out_extent(w, static_cast<int>(k), stride, pad);
  if (grad_out.shape() != std::vector<std::size_t>{n, f, oh, ow}) {
    fail(ErrorCode::InvalidShape, "conv2d_backward: grad_out shape mismatch");
  }
  const T* in = input.data();
  const T* ker = kernel.data();
  const T* go = grad_out.data();
  T* gi = grad_input.data();
  T* gk = grad_kernel.data();
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t fi = 0; fi < f; ++fi) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T g = go[((ni * f + fi) * oh + oy) * ow + ox];
          if (g == T(0)) continue;
          const long y0 = static_cast<long>(oy) * stride - pad;
          const long x0 = static_cast<long>(ox) * stride - pad;
          for (std::size_t ci = 0; ci < c; ++ci) {
            const T* inp = in + ((ni * c + ci) * h) * w;
            T* gip = gi + ((ni * c + ci) * h) * w;
            const T* kp = ker + ((fi * c + ci) * k) * k;
            T* gkp = gk + ((fi * c + ci) * k) * k;
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long y = y0 + static_cast<long>(ky);
              if (y < 0 || y >= static_cast<long>(h)) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long x = x0 + static_cast<long>(kx);
                if (x < 0 || x >= static_cast<long>(w)) continue;
                gip[y * static_cast<long>(w) + x] += g * kp[ky * k + kx];
                gkp[ky * k + kx] += g * inp[y * static_cast<long>(w) + x];
              }
            }
          }
        }
      }
    }
  }
}

// Transposed convolution (stride upsampling, no padding), used by the output
// head to map the token grid back to pixel space. Kernel layout [Cin,Cout,k,k].

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride) {
  if (input.ndim() != 4 || kernel.ndim() != 4) {
    fail(ErrorCode::InvalidShape, "conv_transpose2d: expected 4-d tensors");
  }
  if (stride < 1) fail(ErrorCode::InvalidShape, "conv_transpose2d: stride must be >= 1");
  if (input.extent(1) != kernel.extent(0)) {
    fail(ErrorCode::InvalidShape, "conv_transpose2d: channel mismatch");
  }
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  const std::size_t f = kernel.extent(1), k = kernel.extent(2);
  const std::size_t oh = (h - 1) * static_cast<std::size_t>(stride) + k;
  const std::size_t ow = (w - 1) * static_cast<std::size_t>(stride) + k;
  Tensor<T> out({n, f, oh, ow});
  const T* in = input.data();
  const T* ker = kernel.data();
  T* o = out.data();
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const T* inp = in + ((ni * c + ci) * h) * w;
      for (std::size_t fi = 0; fi < f; ++fi) {
        const T* kp = ker + ((ci * f + fi) * k) * k;
        T* op = o + ((ni * f + fi) * oh) * ow;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double v = static_cast<double>(inp[y * w + x]);
            if (v == 0.0) continue;
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                op[(y * stride + ky) * ow + (x * stride + kx)] +=
                    static_cast<T>(v * static_cast<double>(kp[ky * k + kx]));
              }
            }
          }
        }
      }
    }
  }
  out.require_finite("conv_transpose2d");
  return out;
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T>& input, const Tensor<T>& kernel, int stride,
                               const Tensor<T>& grad_out, Tensor<T>& grad_input,
                               Tensor<T>& grad_kernel) {
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2),
                    w = input.extent(3);
  const std::size_t f = kernel.extent(1), k = kernel.extent(2);
  const std::size_t oh = (h - 1) * static_cast<std::size_t>(stride) + k;
  const std::size_t ow = (w - 1) * static_cast<std::size_t>(stride) + k;
  if (grad_out.shape() != std::vector<std::size_t>{n, f, oh, ow} ||
      !grad_input.same_shape(input) || !grad_kernel.same_shape(kernel)) {
    fail(ErrorCode::InvalidShape, "conv_transpose2d_backward: shape mismatch");
  }
  const T* in = input.data();
  const T* ker = kernel.data();
  const T* go = grad_out.data();
  T* gi = grad_input.data();
  T* gk = grad_kernel.data();
  for (std::size_t ni = 0; ni < n; ++ni) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const T* inp = in + ((ni * c + ci) * h) * w;
      T* gip = gi + ((ni * c + ci) * h) * w;
      for (std::size_t fi = 0; fi < f; ++fi) {
        const T* kp = ker + ((ci * f + fi) * k) * k;
        T* gkp = gk + ((ci * f + fi) * k) * k;
        const T* gop = go + ((ni * f + fi) * oh) * ow;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                const T g = gop[(y * stride + ky) * ow + (x * stride + kx)];
                acc += static_cast<double>(g) * static_cast<double>(kp[ky * k + kx]);
                gkp[ky * k + kx] += g * inp[y * w + x];
              }
            }
            gip[y * w + x] += static_cast<T>(acc);
          }
        }
      }
    }
  }
}

}  // namespace splinediff
