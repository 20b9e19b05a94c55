#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace irda {

enum class ErrorKind {
  ConfigInvalid,
  UnknownPolicy,
  UnsupportedLayout,
  ParseError,
  TooFewSamples,
  TooFewPoints,
  OutOfRange,
  Transport,
  BadCredential,
  NoLogprobsAvailable,
  UnknownFingerprint,
  ContextInvalid,
  MalformedAnswer,
  StageIncomplete,
  UnexpectedState,
  UnparsableLabel,
  HypothesisUnparsable,
  TooFewTrajectories,
  DimensionMismatch,
  InsufficientSamples,
  DegenerateMarginals,
  SingleClassTruth,
  AllZeroDifferences,
  NotFound,
  BadRequest,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::UnknownPolicy: return "UnknownPolicy";
    case ErrorKind::UnsupportedLayout: return "UnsupportedLayout";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::Transport: return "Transport";
    case ErrorKind::BadCredential: return "BadCredential";
    case ErrorKind::NoLogprobsAvailable: return "NoLogprobsAvailable";
    case ErrorKind::UnknownFingerprint: return "UnknownFingerprint";
    case ErrorKind::ContextInvalid: return "ContextInvalid";
    case ErrorKind::MalformedAnswer: return "MalformedAnswer";
    case ErrorKind::StageIncomplete: return "StageIncomplete";
    case ErrorKind::UnexpectedState: return "UnexpectedState";
    case ErrorKind::UnparsableLabel: return "UnparsableLabel";
    case ErrorKind::HypothesisUnparsable: return "HypothesisUnparsable";
    case ErrorKind::TooFewTrajectories: return "TooFewTrajectories";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DegenerateMarginals: return "DegenerateMarginals";
    case ErrorKind::SingleClassTruth: return "SingleClassTruth";
    case ErrorKind::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::BadRequest: return "BadRequest";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one ErrorKind so callers
/// (the HTTP layer in particular) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

  bool retryable() const noexcept { return kind_ == ErrorKind::Transport; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// Parse failure that remembers the 1-based line it happened on.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorKind::ParseError,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace irda
