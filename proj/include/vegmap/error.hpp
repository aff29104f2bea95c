#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vegmap {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  out_of_bounds,
  layout_mismatch,
  degenerate_data,
  parse_error,
  io_error,
  not_found,
  conflict,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::out_of_bounds: return "out_of_bounds";
    case ErrorCode::layout_mismatch: return "layout_mismatch";
    case ErrorCode::degenerate_data: return "degenerate_data";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code and an
/// optional detail string (row/column diagnostics, offending ids).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline void require(bool condition, ErrorCode code, const std::string& message,
                    std::string detail = {}) {
  if (!condition) throw Error(code, message, std::move(detail));
}

}  // namespace vegmap
