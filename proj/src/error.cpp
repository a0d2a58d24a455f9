#include "singext/error.hpp"

namespace singext {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::OutsideTube: return "OutsideTube";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateTangent: return "DegenerateTangent";
    case ErrorCode::NotOnManifold: return "NotOnManifold";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::TailNotConstant: return "TailNotConstant";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::SlabTooShallow: return "SlabTooShallow";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::CoverageGap: return "CoverageGap";
    case ErrorCode::MissingBound: return "MissingBound";
    case ErrorCode::TubeEscape: return "TubeEscape";
    case ErrorCode::BoundaryNotOnManifold: return "BoundaryNotOnManifold";
    case ErrorCode::NonFiniteEnergy: return "NonFiniteEnergy";
    case ErrorCode::FitInfeasible: return "FitInfeasible";
    case ErrorCode::PoleOnSupport: return "PoleOnSupport";
    case ErrorCode::BoundaryTouch: return "BoundaryTouch";
    case ErrorCode::InsufficientRadii: return "InsufficientRadii";
    case ErrorCode::Unsupported: return "Unsupported";
  }
  return "Unknown";
}

}  // namespace singext
