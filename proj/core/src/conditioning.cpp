#include "splinediff/conditioning.hpp"

#include <algorithm>
#include <unordered_set>

namespace splinediff {

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Warmup: return "warmup";
    case Stage::Injection: return "injection";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& s) {
  if (s == "warmup") return Stage::Warmup;
  if (s == "injection") return Stage::Injection;
  fail(ErrorCode::InvalidStage, "unknown stage '" + s + "'");
}

namespace {

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

bool is_condition_param(const std::string& name) {
  return starts_with(name, "depth_encoder.") || starts_with(name, "align.") ||
         starts_with(name, "style.");
}

}  // namespace

bool trainable_in_stage(const std::string& name, Stage stage) {
  switch (stage) {
    case Stage::Warmup:
      return !is_condition_param(name);
    case Stage::Injection:
      return starts_with(name, "asd.") || starts_with(name, "depth_encoder.") ||
             starts_with(name, "style.") || name == "align.gamma";
  }
  fail(ErrorCode::InvalidStage, "unknown stage value");
}

ParamPartition partition_params(const std::vector<std::string>& names, Stage stage) {
  std::unordered_set<std::string> seen;
  for (const std::string& n : names) {
    if (!seen.insert(n).second) {
      fail(ErrorCode::InvalidParams, "partition_params: duplicate name '" + n + "'");
    }
  }
  ParamPartition out;
  for (const std::string& n : names) {
    (trainable_in_stage(n, stage) ? out.trainable : out.frozen).push_back(n);
  }
  return out;
}

}  // namespace splinediff
