#pragma once

#include <vector>

#include "splinediff/tensor.hpp"

namespace splinediff {

/// Uniform B-spline knot grid over [lo, hi] with `intervals` interior cells
/// and spline order (degree) `order`. The knot vector extends `order` cells
/// past each bound (uniform extension rather than repeated endpoints) so the
/// partition of unity holds on the whole closed domain. Inputs outside
/// [lo, hi] are clamped; the spline derivative is zero out there.
struct KnotGrid {
  double lo = -3.0;
  double hi = 3.0;
  int intervals = 8;  // G
  int order = 3;      // k
  std::vector<double> knots;  // length G + 2k + 1

  static KnotGrid make_uniform(double lo, double hi, int intervals, int order);

  int basis_count() const { return intervals + order; }
  double step() const { return (hi - lo) / intervals; }
  bool in_domain(double x) const { return x >= lo && x <= hi; }
};

inline constexpr int kMaxSplineOrder = 8;

/// Window form: only order+1 basis functions are nonzero at any x. Fills
/// vals[0 .. order] with B_{first}(x) .. B_{first+order}(x) via Cox-de Boor
/// after clamping x to the domain. Returns the first active basis index.
int basis_window(const KnotGrid& grid, double x, double* vals);

/// Window form of the first derivatives (order-reduction formula). All-zero
/// when x lies strictly outside the domain, matching the clamping contract.
int basis_deriv_window(const KnotGrid& grid, double x, double* vals);

/// Dense forms over all G+k basis functions.
TensorD basis_eval(const KnotGrid& grid, double x);
TensorD basis_deriv(const KnotGrid& grid, double x);

}  // namespace splinediff
