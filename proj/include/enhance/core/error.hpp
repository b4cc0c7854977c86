#pragma once

#include <stdexcept>
#include <string>

namespace enhance {

enum class ErrorCode {
  InvalidValue,
  ShapeMismatch,
  DegenerateInput,
  DegenerateMask,
  MaskNotFull,
  FormatError,
  IntegrityError,
  TooFewStars,
  DegenerateQuad,
  DecodeError,
  ConfigError,
  EmptyRun,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::MaskNotFull: return "MaskNotFull";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::TooFewStars: return "TooFewStars";
    case ErrorCode::DegenerateQuad: return "DegenerateQuad";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptyRun: return "EmptyRun";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace enhance
