#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multifield {

enum class ErrorCode {
  magic_mismatch,
  truncated_file,
  invariant_violation,
  io_failure,
  out_of_box,
  insufficient_points,
  missing_property,
  missing_radii,
  missing_mass_grid,
  not_divisible,
  out_of_range,
  parse_error,
  shape_mismatch,
  empty_input,
  shape_underflow,
  record_out_of_range,
  invalid_argument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::magic_mismatch: return "MagicMismatch";
    case ErrorCode::truncated_file: return "TruncatedFile";
    case ErrorCode::invariant_violation: return "InvariantViolation";
    case ErrorCode::io_failure: return "IoFailure";
    case ErrorCode::out_of_box: return "OutOfBox";
    case ErrorCode::insufficient_points: return "InsufficientPoints";
    case ErrorCode::missing_property: return "MissingProperty";
    case ErrorCode::missing_radii: return "MissingRadii";
    case ErrorCode::missing_mass_grid: return "MissingMassGrid";
    case ErrorCode::not_divisible: return "NotDivisible";
    case ErrorCode::out_of_range: return "OutOfRange";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::shape_underflow: return "ShapeUnderflow";
    case ErrorCode::record_out_of_range: return "RecordOutOfRange";
    case ErrorCode::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

// All recoverable failures of the library surface as this one exception type;
// code() identifies the failure class, what() carries the context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace multifield
