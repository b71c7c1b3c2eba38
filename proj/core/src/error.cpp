#include "uwsfm/error.hpp"

namespace uwsfm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::TotalInternalReflection: return "TotalInternalReflection";
    case ErrorCode::GrazingIncidence: return "GrazingIncidence";
    case ErrorCode::RayParallelToPlane: return "RayParallelToPlane";
    case ErrorCode::PlaneBehindCamera: return "PlaneBehindCamera";
    case ErrorCode::NoValidRefractionPoint: return "NoValidRefractionPoint";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegeneratePair: return "DegeneratePair";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::PnPFailure: return "PnPFailure";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::Unsolvable: return "Unsolvable";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string module, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + module + ": " + message),
      code_(code),
      module_(std::move(module)),
      detail_(message) {}

}  // namespace uwsfm
