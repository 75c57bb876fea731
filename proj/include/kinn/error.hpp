#pragma once

#include <stdexcept>
#include <string>

namespace kinn {

/// Base class for every error raised by the library. `kind()` is a short,
/// stable tag that the command-line tool prints as a greppable prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// A precondition of an operation was violated (shape mismatch, bad range).
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& message)
      : Error("contract", message) {}
};

/// Generator parameters whose oblique edges have zero run (P_bar == P_plus).
class DegenerateGeometry : public Error {
 public:
  explicit DegenerateGeometry(const std::string& message)
      : Error("degenerate-geometry", message) {}
};

class InfeasibleInstance : public Error {
 public:
  explicit InfeasibleInstance(const std::string& message)
      : Error("infeasible", message) {}
};

class SolverFailure : public Error {
 public:
  explicit SolverFailure(const std::string& message)
      : Error("solver", message) {}
};

/// Non-finite values showed up during training or inference. `step()` is -1
/// when the failure happened outside of a training step.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, long step)
      : Error("divergence", step >= 0 ? message + " at step " +
                                            std::to_string(step)
                                      : message),
        step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

class CorruptCheckpoint : public Error {
 public:
  explicit CorruptCheckpoint(const std::string& message)
      : Error("corrupt-checkpoint", message) {}
};

class UnsupportedVersion : public Error {
 public:
  explicit UnsupportedVersion(const std::string& message)
      : Error("unsupported-version", message) {}
};

/// Invalid run configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config", field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed or invariant-violating tabular input. Rows are 1-based data rows
/// (the header is row 0); 0 means the problem is not tied to a row.
class InputError : public Error {
 public:
  InputError(long row, const std::string& message)
      : Error("input", row > 0 ? "row " + std::to_string(row) + ": " + message
                               : message),
        row_(row) {}

  long row() const noexcept { return row_; }

 private:
  long row_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

}  // namespace kinn
