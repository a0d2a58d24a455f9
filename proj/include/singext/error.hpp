#pragma once

#include <stdexcept>
#include <string>

namespace singext {

enum class ErrorCode {
  InvalidInput,
  OutsideTube,
  NoConvergence,
  DegenerateTangent,
  NotOnManifold,
  EmptyIntersection,
  TailNotConstant,
  BoundViolation,
  SlabTooShallow,
  EmptyRange,
  CoverageGap,
  MissingBound,
  TubeEscape,
  BoundaryNotOnManifold,
  NonFiniteEnergy,
  FitInfeasible,
  PoleOnSupport,
  BoundaryTouch,
  InsufficientRadii,
  Unsupported,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace singext
