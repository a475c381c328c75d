#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "splinediff/tensor.hpp"

namespace splinediff {

/// Counter-based generator: output n is a pure function of (seed, n), so a
/// stream can be checkpointed as two integers and replayed exactly. The
/// update is the SplitMix64 output function over the state seed + n*GAMMA.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64() {
    ++counter_;
    return mix(seed_ + counter_ * kGamma);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). Modulo bias is below 2^-53 for the corpus and
  /// batch sizes this project uses.
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

  /// Box-Muller pair of independent standard normals.
  void normal_pair(double& z0, double& z1) {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;       // [0, 1)
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(a);
    z1 = r * std::sin(a);
  }

  double normal() {
    double z0, z1;
    normal_pair(z0, z1);
    return z0;
  }

  /// Derives an independent child stream; the parent state is not consumed.
  Rng fork(std::uint64_t stream) const {
    return Rng(mix(seed_ ^ mix(stream + 0xA0761D6478BD642Full)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// I.i.d. standard normal tensor. Consumes one Box-Muller pair per two
/// elements; the trailing value of an odd-length draw is discarded so the
/// stream position depends only on the element count.
template <typename T>
Tensor<T> gaussian_sample(Rng& rng, const std::vector<std::size_t>& shape) {
  if (shape.empty()) fail(ErrorCode::InvalidShape, "gaussian_sample: empty shape");
  Tensor<T> out(shape);
  std::size_t n = out.numel();
  if (n == 0) fail(ErrorCode::InvalidShape, "gaussian_sample: zero-extent shape");
  for (std::size_t i = 0; i < n; i += 2) {
    double z0, z1;
    rng.normal_pair(z0, z1);
    out[i] = static_cast<T>(z0);
    if (i + 1 < n) out[i + 1] = static_cast<T>(z1);
  }
  return out;
}

}  // namespace splinediff
