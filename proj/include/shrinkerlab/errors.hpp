#pragma once

#include <stdexcept>
#include <string>

namespace shrinkerlab {

// Every failure raised by the library derives from Error so callers (the CLI in
// particular) can map "expected" numerical failures to exit codes uniformly.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define SHRINKERLAB_ERROR(Name)                                 \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

SHRINKERLAB_ERROR(InvalidCurve);
SHRINKERLAB_ERROR(DegenerateCurve);
SHRINKERLAB_ERROR(InterpolationFailure);
SHRINKERLAB_ERROR(BlowupDetected);
SHRINKERLAB_ERROR(StepRejected);
SHRINKERLAB_ERROR(NotShrinking);
SHRINKERLAB_ERROR(TimeOutOfRange);
SHRINKERLAB_ERROR(NotAGraph);
SHRINKERLAB_ERROR(FrameMissing);
SHRINKERLAB_ERROR(EnergyUnderflow);
SHRINKERLAB_ERROR(ConvergenceFailure);
SHRINKERLAB_ERROR(WindowTooShort);
SHRINKERLAB_ERROR(ConfigInvalid);

#undef SHRINKERLAB_ERROR

}  // namespace shrinkerlab
