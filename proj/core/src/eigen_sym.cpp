#include "splinediff/eigen_sym.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splinediff {

namespace {

double max_abs(const TensorD& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i]));
  return m;
}

double max_offdiag(const double* a, std::size_t d) {
  double m = 0.0;
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t q = p + 1; q < d; ++q) {
      m = std::max(m, std::abs(a[p * d + q]));
    }
  }
  return m;
}

}  // namespace

EigResult sym_eigendecomp(const TensorD& input) {
  if (input.ndim() != 2 || input.extent(0) != input.extent(1)) {
    fail(ErrorCode::InvalidShape, "sym_eigendecomp: expected square matrix");
  }
  const std::size_t d = input.extent(0);
  if (d > 256) fail(ErrorCode::InvalidShape, "sym_eigendecomp: d > 256");
  input.require_finite("sym_eigendecomp");

  const double scale = std::max(1.0, max_abs(input));
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t q = p + 1; q < d; ++q) {
      if (std::abs(input[p * d + q] - input[q * d + p]) > 1e-9 * scale) {
        fail(ErrorCode::NotSymmetric, "sym_eigendecomp: asymmetric input");
      }
    }
  }

  TensorD a = input;
  TensorD v({d, d});
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  const double tol = 1e-14 * scale;
  const int max_sweeps = 100;
  bool converged = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (max_offdiag(a.data(), d) <= tol) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::abs(apq) <= tol) continue;
        const double app = a[p * d + p];
        const double aqq = a[q * d + q];
        // Classic stable rotation (Golub & Van Loan 8.4).
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < d; ++i) {
          const double aip = a[i * d + p];
          const double aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double api = a[p * d + i];
          const double aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double vip = v[i * d + p];
          const double viq = v[i * d + q];
          v[i * d + p] = c * vip - s * viq;
          v[i * d + q] = s * vip + c * viq;
        }
      }
    }
  }
  if (!converged && max_offdiag(a.data(), d) > tol) {
    fail(ErrorCode::NoConvergence, "sym_eigendecomp: Jacobi did not converge in 100 sweeps");
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a[i * d + i] < a[j * d + j]; });

  EigResult result{TensorD({d}), TensorD({d, d})};
  for (std::size_t j = 0; j < d; ++j) {
    result.values[j] = a[order[j] * d + order[j]];
    for (std::size_t i = 0; i < d; ++i) {
      result.vectors[i * d + j] = v[i * d + order[j]];
    }
  }
  return result;
}

TensorD psd_sqrt(const TensorD& a) {
  EigResult eig = sym_eigendecomp(a);
  const std::size_t d = a.extent(0);
  TensorD out({d, d});
  std::vector<double> root(d);
  for (std::size_t j = 0; j < d; ++j) root[j] = std::sqrt(std::max(0.0, eig.values[j]));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        acc += eig.vectors[i * d + k] * root[k] * eig.vectors[j * d + k];
      }
      out[i * d + j] = acc;
    }
  }
  return out;
}

}  // namespace splinediff
