#include <cmath>

#include "doctest.h"
#include "splinediff/conv.hpp"
#include "splinediff/rng.hpp"

using namespace splinediff;

namespace {

// independent oracle: scalar loss L = sum w.out, gradients by central differences
template <typename F>
double fd(F&& eval, double& theta, double h = 1e-4) {
  const double keep = theta;
  theta = keep + h;
  const double up = eval();
  theta = keep - h;
  const double dn = eval();
  theta = keep;
  return (up - dn) / (2.0 * h);
}

}  // namespace

TEST_CASE("conv2d: all-ones 3x3 against 3x3 kernel sums to 9") {
  TensorD in = TensorD::full({1, 1, 3, 3}, 1.0);
  TensorD ker = TensorD::full({1, 1, 3, 3}, 1.0);
  TensorD out = conv2d(in, ker, 1, 0);
  CHECK(out.shape() == std::vector<std::size_t>{1, 1, 1, 1});
  CHECK(out[0] == doctest::Approx(9.0));
}

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input") {
  Rng rng(5);
  TensorD in = gaussian_sample<double>(rng, {1, 1, 4, 5});
  TensorD ker = TensorD::full({1, 1, 1, 1}, 1.0);
  TensorD out = conv2d(in, ker, 1, 0);
  CHECK(out.shape() == in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) CHECK(out[i] == doctest::Approx(in[i]));
}

TEST_CASE("conv2d: output extent formula with stride and pad") {
  TensorD in({1, 1, 16, 16});
  TensorD ker({3, 1, 4, 4});
  TensorD out = conv2d(in, ker, 4, 0);
  CHECK(out.shape() == std::vector<std::size_t>{1, 3, 4, 4});
  TensorD ker3({2, 1, 3, 3});
  TensorD out2 = conv2d(in, ker3, 2, 1);
  CHECK(out2.shape() == std::vector<std::size_t>{1, 2, 8, 8});
}

TEST_CASE("conv2d: channel mismatch rejected") {
  TensorD in({1, 2, 4, 4});
  TensorD ker({1, 3, 2, 2});
  CHECK_THROWS_AS(conv2d(in, ker, 1, 0), Error);
}

TEST_CASE("conv2d backward matches finite differences on 50 random instances") {
  Rng rng(11);
  double max_err = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const std::size_t n = 1 + rng.uniform_int(2);
    const std::size_t c = 1 + rng.uniform_int(2);
    const std::size_t f = 1 + rng.uniform_int(2);
    const std::size_t hw = 3 + rng.uniform_int(3);
    const std::size_t k = 1 + rng.uniform_int(std::min<std::size_t>(3, hw));
    const int stride = 1 + static_cast<int>(rng.uniform_int(2));
    const int pad = static_cast<int>(rng.uniform_int(2));
    TensorD in = gaussian_sample<double>(rng, {n, c, hw, hw});
    TensorD ker = gaussian_sample<double>(rng, {f, c, k, k});
    TensorD out = conv2d(in, ker, stride, pad);
    TensorD w = gaussian_sample<double>(rng, out.shape());

    auto eval = [&]() {
      TensorD o = conv2d(in, ker, stride, pad);
      double l = 0.0;
      for (std::size_t i = 0; i < o.numel(); ++i) l += w[i] * o[i];
      return l;
    };
    TensorD gi(in.shape()), gk(ker.shape());
    conv2d_backward(in, ker, stride, pad, w, gi, gk);
    for (std::size_t i = 0; i < ker.numel(); ++i) {
      const double num = fd(eval, ker[i]);
      max_err = std::max(max_err,
                         std::abs(num - gk[i]) / std::max({std::abs(num), std::abs(gk[i]), 1.0}));
    }
    for (std::size_t i = 0; i < in.numel(); ++i) {
      const double num = fd(eval, in[i]);
      max_err = std::max(max_err,
                         std::abs(num - gi[i]) / std::max({std::abs(num), std::abs(gi[i]), 1.0}));
    }
  }
  CHECK(max_err <= 1e-6);
}

TEST_CASE("conv_transpose2d: shape and finite-difference gradients") {
  Rng rng(13);
  TensorD in = gaussian_sample<double>(rng, {2, 3, 2, 2});
  TensorD ker = gaussian_sample<double>(rng, {3, 1, 4, 4});
  TensorD out = conv_transpose2d(in, ker, 4);
  CHECK(out.shape() == std::vector<std::size_t>{2, 1, 8, 8});
  TensorD w = gaussian_sample<double>(rng, out.shape());
  auto eval = [&]() {
    TensorD o = conv_transpose2d(in, ker, 4);
    double l = 0.0;
    for (std::size_t i = 0; i < o.numel(); ++i) l += w[i] * o[i];
    return l;
  };
  TensorD gi(in.shape()), gk(ker.shape());
  conv_transpose2d_backward(in, ker, 4, w, gi, gk);
  double max_err = 0.0;
  for (std::size_t i = 0; i < ker.numel(); ++i) {
    const double num = fd(eval, ker[i]);
    max_err = std::max(max_err,
                       std::abs(num - gk[i]) / std::max({std::abs(num), std::abs(gk[i]), 1.0}));
  }
  for (std::size_t i = 0; i < in.numel(); ++i) {
    const double num = fd(eval, in[i]);
    max_err = std::max(max_err,
                       std::abs(num - gi[i]) / std::max({std::abs(num), std::abs(gi[i]), 1.0}));
  }
  CHECK(max_err <= 1e-6);
}
