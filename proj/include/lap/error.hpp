#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lap {

enum class ErrorCode {
  DegenerateAxes,
  EmptyScene,
  DegenerateFrame,
  NegativeIndex,
  BehindCamera,
  ParseError,
  ApplyError,
  MismatchedLayouts,
  ShapeMismatch,
  NoMatches,
  DegenerateDegradation,
  CyclicSupport,
  PolicyError,
  Timeout,
  TransportError,
  EmptyResponse,
  FormatError,
  DuplicateId,
  UnknownSession,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::DegenerateAxes: return "DegenerateAxes";
  case ErrorCode::EmptyScene: return "EmptyScene";
  case ErrorCode::DegenerateFrame: return "DegenerateFrame";
  case ErrorCode::NegativeIndex: return "NegativeIndex";
  case ErrorCode::BehindCamera: return "BehindCamera";
  case ErrorCode::ParseError: return "ParseError";
  case ErrorCode::ApplyError: return "ApplyError";
  case ErrorCode::MismatchedLayouts: return "MismatchedLayouts";
  case ErrorCode::ShapeMismatch: return "ShapeMismatch";
  case ErrorCode::NoMatches: return "NoMatches";
  case ErrorCode::DegenerateDegradation: return "DegenerateDegradation";
  case ErrorCode::CyclicSupport: return "CyclicSupport";
  case ErrorCode::PolicyError: return "PolicyError";
  case ErrorCode::Timeout: return "Timeout";
  case ErrorCode::TransportError: return "TransportError";
  case ErrorCode::EmptyResponse: return "EmptyResponse";
  case ErrorCode::FormatError: return "FormatError";
  case ErrorCode::DuplicateId: return "DuplicateId";
  case ErrorCode::UnknownSession: return "UnknownSession";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Parse failure with the 1-based source line it refers to.
class ParseError : public Error {
public:
  ParseError(int line, const std::string& reason)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + reason),
        line_(line), reason_(reason) {}

  int line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

private:
  int line_;
  std::string reason_;
};

} // namespace lap
