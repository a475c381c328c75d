#pragma once

#include <stdexcept>
#include <string>

namespace splinediff {

enum class ErrorCode {
  InvalidShape,
  InvalidInput,
  InvalidState,
  InvalidSchedule,
  InvalidTimestep,
  InvalidDepth,
  InvalidRange,
  InvalidParams,
  InvalidStage,
  NotSymmetric,
  NoConvergence,
  IoError,
  FormatError,
  VersionMismatch,
  InsufficientData,
  IncompatibleStats,
  InsufficientFrames,
  StagePrerequisite,
  MissingState,
  Divergence,
  NonFinite,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace splinediff
