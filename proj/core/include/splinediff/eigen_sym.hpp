#pragma once

#include "splinediff/tensor.hpp"

namespace splinediff {

struct EigResult {
  TensorD values;   // [d], ascending
  TensorD vectors;  // [d,d], column j is the eigenvector of values[j]
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations (d <= 256).
/// A must be symmetric within 1e-9 (relative to its max magnitude).
EigResult sym_eigendecomp(const TensorD& a);

/// V * f(Lambda) * V^T with negative eigenvalues clamped to zero before f;
/// used for the PSD matrix square roots in the Frechet distance.
TensorD psd_sqrt(const TensorD& a);

}  // namespace splinediff
