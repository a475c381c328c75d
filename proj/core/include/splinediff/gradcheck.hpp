#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splinediff {

struct FdSuiteResult {
  std::string name;
  double max_err = 0.0;   // worst relative error seen (mixed-tolerance form)
  double tolerance = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<FdSuiteResult> suites;
  bool pass = false;
};

/// Central-difference verification of every analytic gradient path: spline
/// basis derivatives, KAN layers/networks, the depth and style encoders, and
/// a shrunk full denoiser. All oracles run in f64. `corrupt` deliberately
/// perturbs one analytic gradient so harness failures stay detectable.
GradcheckReport run_gradcheck(std::uint64_t seed, bool corrupt = false);

}  // namespace splinediff
