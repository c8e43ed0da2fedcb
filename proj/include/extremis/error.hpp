#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace extremis {

// Base of every error thrown by the library. `field` names the offending
// input (config path, argument name) when one applies.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, std::string field = {})
      : std::runtime_error(what), message_(what), field_(std::move(field)) {}

  const char* what() const noexcept override { return message_.c_str(); }
  const std::string& field() const noexcept { return field_; }
  virtual const char* kind() const noexcept { return "error"; }

  // Adds caller context in front of the message; rethrow with `throw;` to
  // keep the dynamic type.
  void prepend(const std::string& context) { message_ = context + ": " + message_; }

 private:
  std::string message_;
  std::string field_;
};

#define EXTREMIS_DEFINE_ERROR(Name, tag)                      \
  class Name : public Error {                                 \
   public:                                                    \
    using Error::Error;                                       \
    const char* kind() const noexcept override { return tag; } \
  };

EXTREMIS_DEFINE_ERROR(ParseError, "parse_error")
EXTREMIS_DEFINE_ERROR(ValidationError, "validation_error")
EXTREMIS_DEFINE_ERROR(DomainError, "domain_error")
EXTREMIS_DEFINE_ERROR(NumericalError, "numerical_error")
EXTREMIS_DEFINE_ERROR(InsufficientSamplesError, "insufficient_samples")
EXTREMIS_DEFINE_ERROR(EmptyContourError, "empty_contour")
EXTREMIS_DEFINE_ERROR(SimulationFailure, "simulation_failure")
EXTREMIS_DEFINE_ERROR(InstabilityError, "instability")
EXTREMIS_DEFINE_ERROR(DegenerateSampleError, "degenerate_sample")
EXTREMIS_DEFINE_ERROR(ConvergenceError, "convergence_error")
EXTREMIS_DEFINE_ERROR(RankDeficiencyError, "rank_deficiency")
EXTREMIS_DEFINE_ERROR(DivergenceError, "divergence")
EXTREMIS_DEFINE_ERROR(IndexError, "index_error")
EXTREMIS_DEFINE_ERROR(DependencyError, "missing_dependency")
EXTREMIS_DEFINE_ERROR(IncompatibleError, "incompatible")

#undef EXTREMIS_DEFINE_ERROR

namespace detail {

// Short general-format number for messages (std::to_string prints 1e-7 as 0.000000).
inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace detail

}  // namespace extremis
