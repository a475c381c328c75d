#pragma once

#include <cstdint>
#include <vector>

#include "splinediff/tensor.hpp"

namespace splinediff {

/// Gaussian feature statistics behind the Frechet distance. Features are a
/// fixed seeded random projection of each flattened clip; both corpora of a
/// comparison must share the projection seed.
struct GaussianStats {
  TensorD mean;  // [d]
  TensorD cov;   // [d,d], symmetric, shrinkage-stabilized
  std::size_t n = 0;
  std::uint64_t projection_seed = 0;
  std::size_t dim = 0;
};

GaussianStats fit_gaussian_stats(const std::vector<TensorF>& clips,
                                 std::uint64_t projection_seed, std::size_t dim = 32);

/// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2), clamped >= 0.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct FidelityResult {
  double value = 0.0;
  bool degenerate = false;  // a zero-variance side; value is the 0 sentinel
};

/// Pearson correlation between generated intensity and inverted depth.
FidelityResult depth_fidelity(const TensorF& generated, const TensorF& depth);

/// Mean absolute inter-frame difference; lower = smoother.
double temporal_coherence(const TensorF& clip);

}  // namespace splinediff
