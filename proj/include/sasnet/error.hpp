#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sasnet {

enum class ErrorKind {
  io,
  format,
  length_mismatch,
  validation,
  configuration,
  geometry,
  unsupported_size,
  degenerate_input,
  undefined_metric,
  contract,
  lifecycle,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::length_mismatch: return "length-mismatch";
    case ErrorKind::validation: return "validation";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::unsupported_size: return "unsupported-size";
    case ErrorKind::degenerate_input: return "degenerate-input";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::contract: return "contract";
    case ErrorKind::lifecycle: return "lifecycle";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, detail);
}

}  // namespace sasnet
