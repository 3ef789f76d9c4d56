#pragma once

#include <stdexcept>
#include <string>

namespace decnash {

/// Least-squares path fit failed (underdetermined or rank-deficient system).
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// A geometric quantity (typically a path tangent) degenerated to zero.
class DegenerateGeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario file is malformed, inconsistent, or references missing data.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace decnash
