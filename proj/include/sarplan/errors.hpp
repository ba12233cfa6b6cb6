#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sarplan {

/// Input outside the domain of a closed-form relation (non-positive bandwidth,
/// beamwidth >= pi, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A trajectory could not be planned from the given report and options.
class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KinematicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// IK failed to reach a pose. Carries the best residual seen and whether the
/// arm was at a singular configuration when the solver gave up.
class UnreachablePoseError : public KinematicsError {
 public:
  UnreachablePoseError(const std::string& what, double residual, double manipulability, bool singular)
      : KinematicsError(what), residual_(residual), manipulability_(manipulability), singular_(singular) {}

  double residual() const noexcept { return residual_; }
  double manipulability() const noexcept { return manipulability_; }
  bool singular() const noexcept { return singular_; }

 private:
  double residual_;
  double manipulability_;
  bool singular_;
};

/// Malformed file (bad magic, truncated payload, unparsable CSV row).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration rejected; `field()` is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No measurable peak, truncated mainlobe, or a degenerate position pair.
class MeasurementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sarplan
