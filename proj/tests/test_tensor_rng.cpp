#include <cmath>
#include <sstream>

#include "doctest.h"
#include "splinediff/rng.hpp"
#include "splinediff/tensor.hpp"
#include "splinediff/tensor_io.hpp"

using namespace splinediff;

TEST_CASE("tensor shape/data invariant") {
  TensorF t({2, 3});
  CHECK(t.numel() == 6);
  CHECK_THROWS_AS(TensorF({2, 3}, std::vector<float>(5)), Error);
}

TEST_CASE("gaussian_sample: determinism under identical seed and call sequence") {
  Rng a(7), b(7);
  TensorF x = gaussian_sample<float>(a, {4});
  TensorF y = gaussian_sample<float>(b, {4});
  for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == y[i]);
  // advancing is deterministic too
  TensorF x2 = gaussian_sample<float>(a, {4});
  TensorF y2 = gaussian_sample<float>(b, {4});
  for (std::size_t i = 0; i < 4; ++i) CHECK(x2[i] == y2[i]);
  CHECK(x[0] != x2[0]);
}

TEST_CASE("gaussian_sample: sample mean within the 3-sigma CLT band at N=1e5") {
  for (std::uint64_t seed : {7ull, 8ull}) {
    Rng rng(seed);
    TensorD x = gaussian_sample<double>(rng, {100000});
    double mean = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) mean += x[i];
    mean /= static_cast<double>(x.numel());
    CHECK(std::abs(mean) < 3.0 * std::pow(10.0, -2.5));  // 3/sqrt(1e5)
    double var = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(x.numel());
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("gaussian_sample: empty shape rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(gaussian_sample<float>(rng, {}), Error);
  CHECK_THROWS_AS(gaussian_sample<float>(rng, {0}), Error);
}

TEST_CASE("rng forks are independent of parent consumption") {
  Rng a(42);
  Rng child_before = a.fork(5);
  a.next_u64();
  a.next_u64();
  Rng child_after = a.fork(5);
  CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("counter state reconstructs the stream exactly") {
  Rng a(99);
  for (int i = 0; i < 17; ++i) a.next_u64();
  Rng b(a.seed(), a.counter());
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.normal() == b.normal());
}

TEST_CASE("DPT1 round trip through a stream and a file") {
  Rng rng(3);
  TensorF t = gaussian_sample<float>(rng, {2, 1, 3, 4});
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  write_dpt(ss, t);
  TensorF back = read_dpt(ss);
  CHECK(back.shape() == t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);

  const std::string path = "/tmp/splinediff_test_tensor.dpt";
  write_dpt(path, t);
  TensorF back2 = read_dpt(path);
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(back2[i] == t[i]);
}

TEST_CASE("DPT1 rejects bad magic and truncation") {
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  ss << "NOPE";
  CHECK_THROWS_AS(read_dpt(ss), Error);

  Rng rng(3);
  TensorF t = gaussian_sample<float>(rng, {8});
  std::stringstream full(std::ios::in | std::ios::out | std::ios::binary);
  write_dpt(full, t);
  std::string bytes = full.str();
  std::stringstream cut(std::ios::in | std::ios::out | std::ios::binary);
  cut << bytes.substr(0, bytes.size() - 7);
  try {
    read_dpt(cut);
    FAIL("expected FormatError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FormatError);
  }
}
