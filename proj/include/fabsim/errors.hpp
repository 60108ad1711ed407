#pragma once

#include <stdexcept>
#include <string>

namespace fabsim {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid problem setup, schema violation, bad parameters.
class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& msg) : Error(msg) {}
};

// A joint command or state outside the model's limits.
class JointLimitError : public Error {
 public:
  JointLimitError(int joint, double value, double lower, double upper)
      : Error("joint " + std::to_string(joint + 1) + " value " + std::to_string(value) +
              " outside limits [" + std::to_string(lower) + ", " + std::to_string(upper) + "]"),
        joint_index(joint) {}
  int joint_index;
};

// Non-finite state encountered while integrating a rollout.
class SolverDivergedError : public Error {
 public:
  SolverDivergedError(int step, const std::string& what)
      : Error("rollout diverged at step " + std::to_string(step) + ": " + what), step_index(step) {}
  int step_index;
};

// No mapped fiducial observed; localization cannot produce a fix.
class NoFixError : public Error {
 public:
  explicit NoFixError(const std::string& msg) : Error(msg) {}
};

// Point set does not constrain a rigid alignment (collinear or empty).
class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& msg) : Error(msg) {}
};

// Station planning could not cover a brick from any corridor sample.
class PlanningError : public Error {
 public:
  explicit PlanningError(const std::string& msg) : Error(msg) {}
};

// Primitive compilation failed (e.g. feeder unreachable from a station).
class CompilationError : public Error {
 public:
  explicit CompilationError(const std::string& msg) : Error(msg) {}
};

// Site deviations exceed what the parametric wall may absorb.
class InfeasibleAdaptationError : public Error {
 public:
  explicit InfeasibleAdaptationError(const std::string& msg) : Error(msg) {}
};

// Planned wire segment too far from the previous layer to weld.
class WeldReachError : public Error {
 public:
  explicit WeldReachError(const std::string& msg) : Error(msg) {}
};

// Contour measurement requested with no usable observations.
class MeasurementUnavailableError : public Error {
 public:
  explicit MeasurementUnavailableError(const std::string& msg) : Error(msg) {}
};

}  // namespace fabsim
