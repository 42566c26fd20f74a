#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msfin {

/// Every failure raised by the library carries one of these kinds. The CLI maps
/// them onto exit codes (config = 2, data = 3, numerical = 4).
enum class ErrorKind {
  Dimension,          // shape mismatch between operands
  Contract,           // violated precondition (non-scalar loss, NaN input, ...)
  Index,              // out-of-range index
  MaskedRow,          // attention row with no admissible key
  Config,             // invalid configuration value
  EmptySequence,      // T == 0
  UndefinedMetric,    // metric not defined for the given prediction set
  CheckpointVersion,
  CheckpointDimension,
  CheckpointCorrupt,
  BadMagic,
  FormatVersion,
  ShapeInconsistency,
  TaoOutOfRange,
  LabelInconsistent,
  Import,
  Io,
  Numerical,          // NaN/Inf during training
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

/// Process exit code for an error kind.
int exit_code_for(ErrorKind kind);

}  // namespace msfin
