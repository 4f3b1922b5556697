#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace catis {

/// Error categories. The CLI maps each category to an exit code.
enum class ErrorKind {
  kValidation,          // violated precondition or invariant
  kFormat,              // malformed trace file
  kIo,                  // unreadable/unwritable path
  kDegenerateInput,     // input too small or degenerate for the statistic
  kUndefinedStatistic,  // statistic has zero variance in its denominator
  kContract,            // caller passed data in the wrong state (e.g. unstandardized scores)
  kCapacity,            // reduction budget cannot be satisfied
  kDivergence,          // recurrence overflowed the divergence cutoff
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kValidation, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::kFormat, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what)
      : Error(ErrorKind::kDegenerateInput, what) {}
};

class UndefinedStatisticError : public Error {
 public:
  explicit UndefinedStatisticError(const std::string& what)
      : Error(ErrorKind::kUndefinedStatistic, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorKind::kContract, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::kCapacity, what) {}
};

/// Raised when the distortion state exceeds the divergence cutoff. Carries
/// the last layer index that was reached before the cutoff was crossed.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t layer)
      : Error(ErrorKind::kDivergence, what), layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

}  // namespace catis
