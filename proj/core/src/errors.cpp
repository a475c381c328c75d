#include "splinediff/errors.hpp"

namespace splinediff {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::InvalidTimestep: return "InvalidTimestep";
    case ErrorCode::InvalidDepth: return "InvalidDepth";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidStage: return "InvalidStage";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::IncompatibleStats: return "IncompatibleStats";
    case ErrorCode::InsufficientFrames: return "InsufficientFrames";
    case ErrorCode::StagePrerequisite: return "StagePrerequisite";
    case ErrorCode::MissingState: return "MissingState";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

}  // namespace splinediff
