#include "kstab/errors.hpp"

namespace kstab {

const char* err_name(Err e) {
  switch (e) {
    case Err::UnboundedInput: return "UnboundedInput";
    case Err::DegenerateInput: return "DegenerateInput";
    case Err::InconsistentInput: return "InconsistentInput";
    case Err::DomainMismatch: return "DomainMismatch";
    case Err::SingularPolarizationSystem: return "SingularPolarizationSystem";
    case Err::ChopTooLarge: return "ChopTooLarge";
    case Err::NonDelzantVertex: return "NonDelzantVertex";
    case Err::NotConvex: return "NotConvex";
    case Err::ShiftTooSmall: return "ShiftTooSmall";
    case Err::NonDelzant: return "NonDelzant";
    case Err::NotNormalized: return "NotNormalized";
    case Err::NotAVertex: return "NotAVertex";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::SingularHessian: return "SingularHessian";
    case Err::NewtonDivergence: return "NewtonDivergence";
    case Err::MissingAlpha: return "MissingAlpha";
    case Err::RouteMismatch: return "RouteMismatch";
    case Err::NormalizationRequired: return "NormalizationRequired";
    case Err::InsufficientSamples: return "InsufficientSamples";
    case Err::NonMonotoneTau: return "NonMonotoneTau";
    case Err::ParseError: return "ParseError";
    case Err::ValidationError: return "ValidationError";
    case Err::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(Err e) {
  switch (e) {
    case Err::ParseError: return 2;
    case Err::IoError: return 5;
    case Err::SingularHessian:
    case Err::NewtonDivergence:
    case Err::RouteMismatch:
    case Err::SingularPolarizationSystem:
      return 4;
    default: return 3;
  }
}

}  // namespace kstab
