#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uwsfm {

enum class ErrorCode {
  InvalidArgument,
  TotalInternalReflection,
  GrazingIncidence,
  RayParallelToPlane,
  PlaneBehindCamera,
  NoValidRefractionPoint,
  InsufficientCorrespondences,
  DegeneratePair,
  EmptyCloud,
  PnPFailure,
  NumericalFailure,
  DegenerateConfiguration,
  InfeasibleConfig,
  Unsolvable,
  ConfigError,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a code and the module that
// raised it, so the CLI can print "error: <Code>: <module>: <message>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string module_;
  std::string detail_;
};

}  // namespace uwsfm
