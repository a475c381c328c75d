#include <cmath>

#include "doctest.h"
#include "splinediff/bspline.hpp"
#include "splinediff/rng.hpp"

using namespace splinediff;

TEST_CASE("knot grid layout") {
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  CHECK(g.basis_count() == 11);
  CHECK(g.knots.size() == 8 + 2 * 3 + 1);
  CHECK(g.knots.front() == doctest::Approx(-3.0 - 3 * 0.75));
  CHECK(g.knots.back() == doctest::Approx(3.0 + 3 * 0.75));
  CHECK_THROWS_AS(KnotGrid::make_uniform(1.0, 1.0, 8, 3), Error);
}

TEST_CASE("partition of unity over 1000 random in-domain points") {
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(g.lo, g.hi);
    TensorD b = basis_eval(g, x);
    double sum = 0.0;
    for (std::size_t j = 0; j < b.numel(); ++j) {
      CHECK(b[j] >= 0.0);
      sum += b[j];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
  // endpoints included in the domain
  for (double x : {-3.0, 3.0}) {
    TensorD b = basis_eval(g, x);
    double sum = 0.0;
    for (std::size_t j = 0; j < b.numel(); ++j) sum += b[j];
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("cardinal cubic values at an interior knot: 1/6, 2/3, 1/6") {
  // Cox-de Boor by hand for uniform cubic splines at a knot: the three
  // surviving basis functions take (1/6, 2/3, 1/6).
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  const double x = g.lo + 3 * g.step();  // interior knot
  TensorD b = basis_eval(g, x);
  int nonzero = 0;
  for (std::size_t j = 0; j < b.numel(); ++j) {
    if (b[j] != 0.0) ++nonzero;
  }
  CHECK(nonzero == 3);
  double window[kMaxSplineOrder + 1];
  const int first = basis_window(g, x, window);
  (void)first;
  CHECK(std::abs(window[0] - 1.0 / 6.0) <= 1e-12);
  CHECK(std::abs(window[1] - 2.0 / 3.0) <= 1e-12);
  CHECK(std::abs(window[2] - 1.0 / 6.0) <= 1e-12);
  CHECK(std::abs(window[3]) <= 1e-12);
}

TEST_CASE("local support: at most order+1 nonzero entries") {
  KnotGrid g = KnotGrid::make_uniform(-2.0, 2.0, 6, 3);
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    TensorD b = basis_eval(g, rng.uniform(g.lo, g.hi));
    int nonzero = 0;
    for (std::size_t j = 0; j < b.numel(); ++j) nonzero += b[j] != 0.0;
    CHECK(nonzero <= g.order + 1);
  }
}

TEST_CASE("out-of-domain inputs clamp to the boundary value") {
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  TensorD far = basis_eval(g, g.lo - 5.0);
  TensorD at = basis_eval(g, g.lo);
  for (std::size_t j = 0; j < far.numel(); ++j) CHECK(far[j] == at[j]);
  TensorD dfar = basis_deriv(g, g.hi + 2.0);
  for (std::size_t j = 0; j < dfar.numel(); ++j) CHECK(dfar[j] == 0.0);
}

TEST_CASE("NaN input rejected") {
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  CHECK_THROWS_AS(basis_eval(g, std::nan("")), Error);
  CHECK_THROWS_AS(basis_deriv(g, std::nan("")), Error);
}

TEST_CASE("derivatives sum to zero in the interior") {
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  Rng rng(33);
  for (int i = 0; i < 1000; ++i) {
    TensorD d = basis_deriv(g, rng.uniform(g.lo, g.hi));
    double sum = 0.0;
    for (std::size_t j = 0; j < d.numel(); ++j) sum += d[j];
    CHECK(std::abs(sum) <= 1e-10);
  }
}

TEST_CASE("derivative at the symmetric grid center: centered basis has slope 0") {
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  TensorD d = basis_deriv(g, 0.0);
  // 0 is an interior knot of this grid; the centered (peak) basis is flat there
  TensorD b = basis_eval(g, 0.0);
  std::size_t center = 0;
  for (std::size_t j = 1; j < b.numel(); ++j) {
    if (b[j] > b[center]) center = j;
  }
  CHECK(std::abs(d[center]) <= 1e-12);
}

TEST_CASE("derivative consistency against central differences, 1000 points") {
  KnotGrid g = KnotGrid::make_uniform(-3.0, 3.0, 8, 3);
  Rng rng(34);
  const double h = 1e-6;
  double max_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(g.lo + 1e-3, g.hi - 1e-3);
    TensorD d = basis_deriv(g, x);
    TensorD up = basis_eval(g, x + h);
    TensorD dn = basis_eval(g, x - h);
    for (std::size_t j = 0; j < d.numel(); ++j) {
      max_err = std::max(max_err, std::abs((up[j] - dn[j]) / (2.0 * h) - d[j]));
    }
  }
  CHECK(max_err <= 1e-6);
}

TEST_CASE("quadratic and quartic orders also hold the identities") {
  for (int order : {2, 4}) {
    KnotGrid g = KnotGrid::make_uniform(-1.0, 1.0, 5, order);
    Rng rng(35);
    for (int i = 0; i < 100; ++i) {
      const double x = rng.uniform(g.lo, g.hi);
      TensorD b = basis_eval(g, x);
      double sum = 0.0;
      for (std::size_t j = 0; j < b.numel(); ++j) sum += b[j];
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      TensorD d = basis_deriv(g, x);
      double dsum = 0.0;
      for (std::size_t j = 0; j < d.numel(); ++j) dsum += d[j];
      CHECK(std::abs(dsum) <= 1e-10);
    }
  }
}
