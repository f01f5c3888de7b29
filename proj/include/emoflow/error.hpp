#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

namespace emoflow {

enum class ErrorCode {
  UnrecognizedLabel,
  MissingSeparator,
  UnrecognizedBinary,
  MissingColumn,
  DuplicateId,
  BadRow,
  IoFailure,
  ConfigInvalid,
  AuthFailure,
  Timeout,
  TransientFailure,
  ExhaustedRetries,
  DimensionMismatch,
  EmptyIndex,
  IdMismatch,
  CycleDetected,
  OutOfRange,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnrecognizedLabel: return "UnrecognizedLabel";
    case ErrorCode::MissingSeparator: return "MissingSeparator";
    case ErrorCode::UnrecognizedBinary: return "UnrecognizedBinary";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BadRow: return "BadRow";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TransientFailure: return "TransientFailure";
    case ErrorCode::ExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::OutOfRange: return "OutOfRange";
  }
  return "Unknown";
}

struct Error {
  ErrorCode code;
  std::string message;

  std::string to_string() const {
    return std::string(error_code_name(code)) + ": " + message;
  }
};

/// Exception carrying a typed error code. Thrown on fatal paths (bad config,
/// I/O failures); routine per-item failures travel as Result instead.
class EmoflowError : public std::runtime_error {
 public:
  EmoflowError(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  explicit EmoflowError(Error err)
      : std::runtime_error(err.message), code_(err.code) {}

  ErrorCode code() const { return code_; }
  Error error() const { return Error{code_, what()}; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw EmoflowError(code, message);
}

/// Value-or-error, used where failures are expected outcomes rather than
/// exceptional ones (model-output parsing, per-item batch results).
template <class T>
class Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Error err) : v_(std::move(err)) {}  // NOLINT(google-explicit-constructor)

  static Result failure(ErrorCode code, std::string message) {
    return Result(Error{code, std::move(message)});
  }

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& { return std::get<T>(v_); }
  T&& value() && { return std::get<T>(std::move(v_)); }
  const Error& error() const { return std::get<Error>(v_); }

  /// Returns the value or throws the carried error.
  const T& expect() const& {
    if (!ok()) throw EmoflowError(error());
    return value();
  }

 private:
  std::variant<T, Error> v_;
};

}  // namespace emoflow
