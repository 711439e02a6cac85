#pragma once

#include <stdexcept>
#include <string>

namespace blurbridge {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
  usage = 1,    // bad flags, malformed or unknown config keys
  data = 2,     // missing files, bad shapes, empty sets, infeasible splits
  numeric = 3,  // non-finite losses, degenerate estimation problems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

// Specific data errors, so tests can tell them apart.
struct ShapeMismatchError : DataError {
  using DataError::DataError;
};
struct TooSmallError : DataError {
  using DataError::DataError;
};
struct EmptySetError : DataError {
  using DataError::DataError;
};
struct InvalidRangeError : UsageError {
  using UsageError::UsageError;
};
struct DegenerateInputError : NumericError {
  using NumericError::NumericError;
};

}  // namespace blurbridge
