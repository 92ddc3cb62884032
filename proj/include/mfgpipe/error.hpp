#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

// Bad input, violated precondition, or malformed configuration. The CLI maps
// this to exit code 1; every other std::exception maps to exit code 2.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A statistic needs spread that the data does not have, e.g. a constant column
// handed to a correlation.
class ZeroVarianceError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// An iterative solver hit its sweep budget.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double final_change)
      : std::runtime_error(what), final_change_(final_change) {}
  double final_change() const noexcept { return final_change_; }

private:
  double final_change_;
};

}  // namespace mfg
