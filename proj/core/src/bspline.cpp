#include "splinediff/bspline.hpp"

#include <algorithm>
#include <cmath>

namespace splinediff {

KnotGrid KnotGrid::make_uniform(double lo, double hi, int intervals, int order) {
  if (!(lo < hi)) fail(ErrorCode::InvalidParams, "KnotGrid: lo must be < hi");
  if (intervals < 1) fail(ErrorCode::InvalidParams, "KnotGrid: intervals must be >= 1");
  if (order < 1 || order > kMaxSplineOrder) {
    fail(ErrorCode::InvalidParams, "KnotGrid: order out of range");
  }
  KnotGrid g;
  g.lo = lo;
  g.hi = hi;
  g.intervals = intervals;
  g.order = order;
  const double h = (hi - lo) / intervals;
  g.knots.resize(static_cast<std::size_t>(intervals + 2 * order + 1));
  for (int i = 0; i < intervals + 2 * order + 1; ++i) {
    g.knots[static_cast<std::size_t>(i)] = lo + (i - order) * h;
  }
  return g;
}

namespace {

// Span index j with knots[j] <= x < knots[j+1], restricted to the domain
// spans [k, G+k-1]. x == hi falls in the last span.
int find_span(const KnotGrid& g, double x) {
  const int k = g.order;
  const int last = g.intervals + k - 1;
  const double cell = (x - g.lo) / g.step();
  int j = k + static_cast<int>(cell);
  return std::clamp(j, k, last);
}

double clamp_domain(const KnotGrid& g, double x) {
  if (std::isnan(x)) fail(ErrorCode::InvalidInput, "bspline: NaN input");
  return std::clamp(x, g.lo, g.hi);
}

// Cox-de Boor triangle for the k+1 nonzero order-`deg` basis values at span
// j; vals[r] = B_{j-deg+r, deg}(x).
void cox_de_boor(const KnotGrid& g, int j, double x, int deg, double* vals) {
  const std::vector<double>& t = g.knots;
  double left[kMaxSplineOrder + 1];
  double right[kMaxSplineOrder + 1];
  vals[0] = 1.0;
  for (int d = 1; d <= deg; ++d) {
    left[d] = x - t[static_cast<std::size_t>(j + 1 - d)];
    right[d] = t[static_cast<std::size_t>(j + d)] - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double tmp = vals[r] / (right[r + 1] + left[d - r]);
      vals[r] = saved + right[r + 1] * tmp;
      saved = left[d - r] * tmp;
    }
    vals[d] = saved;
  }
}

}  // namespace

int basis_window(const KnotGrid& grid, double x, double* vals) {
  const double xc = clamp_domain(grid, x);
  const int j = find_span(grid, xc);
  cox_de_boor(grid, j, xc, grid.order, vals);
  return j - grid.order;
}

int basis_deriv_window(const KnotGrid& grid, double x, double* vals) {
  if (std::isnan(x)) fail(ErrorCode::InvalidInput, "bspline: NaN input");
  const int k = grid.order;
  if (!grid.in_domain(x)) {
    for (int r = 0; r <= k; ++r) vals[r] = 0.0;
    const int j = find_span(grid, std::clamp(x, grid.lo, grid.hi));
    return j - k;
  }
  const int j = find_span(grid, x);
  // B'_{m,k} = k * ( B_{m,k-1}/(t_{m+k} - t_m) - B_{m+1,k-1}/(t_{m+k+1} - t_{m+1}) )
  double low[kMaxSplineOrder + 1];  // low[r] = B_{j-(k-1)+r, k-1}(x)
  cox_de_boor(grid, j, x, k - 1, low);
  const std::vector<double>& t = grid.knots;
  for (int r = 0; r <= k; ++r) {
    const int m = j - k + r;
    const double a =
        (r >= 1) ? low[r - 1] / (t[static_cast<std::size_t>(m + k)] -
                                 t[static_cast<std::size_t>(m)])
                 : 0.0;  // B_{m,k-1} is zero for the leftmost window entry
    const double b =
        (r <= k - 1) ? low[r] / (t[static_cast<std::size_t>(m + k + 1)] -
                                 t[static_cast<std::size_t>(m + 1)])
                     : 0.0;
    vals[r] = k * (a - b);
  }
  return j - k;
}

TensorD basis_eval(const KnotGrid& grid, double x) {
  TensorD out({static_cast<std::size_t>(grid.basis_count())});
  double window[kMaxSplineOrder + 1];
  const int first = basis_window(grid, x, window);
  for (int r = 0; r <= grid.order; ++r) out[static_cast<std::size_t>(first + r)] = window[r];
  return out;
}

TensorD basis_deriv(const KnotGrid& grid, double x) {
  TensorD out({static_cast<std::size_t>(grid.basis_count())});
  double window[kMaxSplineOrder + 1];
  const int first = basis_deriv_window(grid, x, window);
  for (int r = 0; r <= grid.order; ++r) out[static_cast<std::size_t>(first + r)] = window[r];
  return out;
}

}  // namespace splinediff
