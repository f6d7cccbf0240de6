#pragma once

#include <stdexcept>
#include <string>

namespace kstab {

enum class Err {
  UnboundedInput,
  DegenerateInput,
  InconsistentInput,
  DomainMismatch,
  SingularPolarizationSystem,
  ChopTooLarge,
  NonDelzantVertex,
  NotConvex,
  ShiftTooSmall,
  NonDelzant,
  NotNormalized,
  NotAVertex,
  DimensionMismatch,
  SingularHessian,
  NewtonDivergence,
  MissingAlpha,
  RouteMismatch,
  NormalizationRequired,
  InsufficientSamples,
  NonMonotoneTau,
  ParseError,
  ValidationError,
  IoError,
};

const char* err_name(Err e);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

// CLI exit status for an error kind
int exit_code(Err e);

}  // namespace kstab
