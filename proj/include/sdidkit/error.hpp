#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sdidkit {

/// Exit codes used by the command-line driver.
enum class ExitCode : int {
  ok = 0,
  input = 2,
  non_convergence = 3,
  identification = 4,
};

/// Malformed or inconsistent input (bad CSV rows, invalid shapes, unknown names).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver ran out of iterations before meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> objective_trace)
      : std::runtime_error(what), trace_(std::move(objective_trace)) {}

  const std::vector<double>& objective_trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

/// A quantity is not identified: rank-deficient designs, collinear covariates,
/// degenerate variance adjustments.
class IdentificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline ExitCode exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const InputError*>(&e)) return ExitCode::input;
  if (dynamic_cast<const ConvergenceError*>(&e)) return ExitCode::non_convergence;
  if (dynamic_cast<const IdentificationError*>(&e)) return ExitCode::identification;
  return ExitCode::input;
}

}  // namespace sdidkit
