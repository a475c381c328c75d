#include "doctest.h"
#include "splinediff/config.hpp"

using namespace splinediff;

TEST_CASE("config round trip is idempotent") {
  Config c;
  c.seed = 42;
  c.data_dir = "/tmp/data";
  c.variant = Variant::NoAsd;
  c.train.warmup_steps = 123;
  const std::string text = config_to_json_text(c);
  Config back = config_from_json_text(text);
  CHECK(config_to_json_text(back) == text);
  CHECK(back.seed == 42);
  CHECK(back.variant == Variant::NoAsd);
  CHECK(back.train.warmup_steps == 123);
  CHECK(back.hash() == c.hash());
}

TEST_CASE("config hash changes with content") {
  Config a, b;
  b.seed = a.seed + 1;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("defaults validate; weak schedules are rejected at load") {
  Config c;
  CHECK_NOTHROW(validate_config(c));
  c.diffusion.steps = 3;
  c.diffusion.beta_lo = 1e-4;
  c.diffusion.beta_hi = 1e-3;
  try {
    validate_config(c);
    FAIL("expected InvalidSchedule");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidSchedule);
  }
}

TEST_CASE("geometry must align with the patch size") {
  Config c;
  c.clip.height = 18;
  CHECK_THROWS_AS(validate_config(c), Error);
}

TEST_CASE("variant mapping to model toggles") {
  Config c;
  c.variant = Variant::Full;
  CHECK(c.model_dims().use_asd);
  CHECK(c.model_dims().use_pda);
  c.variant = Variant::NoAsd;
  CHECK_FALSE(c.model_dims().use_asd);
  CHECK(c.model_dims().use_pda);
  c.variant = Variant::NoPda;
  CHECK(c.model_dims().use_asd);
  CHECK_FALSE(c.model_dims().use_pda);
  c.variant = Variant::Baseline;
  CHECK_FALSE(c.model_dims().use_asd);
  CHECK_FALSE(c.model_dims().use_pda);
  CHECK_THROWS_AS(variant_from_string("bogus"), Error);
}

TEST_CASE("malformed and mis-versioned config text") {
  CHECK_THROWS_AS(config_from_json_text("{not json"), Error);
  Config c;
  std::string text = config_to_json_text(c);
  const auto pos = text.find("\"schema_version\": 1");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 19, "\"schema_version\": 9");
  try {
    config_from_json_text(text);
    FAIL("expected VersionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::VersionMismatch);
  }
}
