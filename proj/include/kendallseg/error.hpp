#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kseg {

enum class ErrorCode {
  DegenerateTrajectory,
  ShapeMismatch,
  InvalidParameter,
  ClusterCollapse,
  EmptyCluster,
  NoValidBlock,
  TooFewRepresentatives,
  ParseError,
  BoundsError,
  DuplicateId,
  UnknownId,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::ClusterCollapse: return "ClusterCollapse";
    case ErrorCode::EmptyCluster: return "EmptyCluster";
    case ErrorCode::NoValidBlock: return "NoValidBlock";
    case ErrorCode::TooFewRepresentatives: return "TooFewRepresentatives";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::BoundsError: return "BoundsError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownId: return "UnknownId";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the trajectory parser; `line()` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace kseg
