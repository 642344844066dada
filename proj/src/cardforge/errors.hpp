#pragma once

#include <stdexcept>
#include <string>

namespace cardforge {

// One error family for the whole library. Data-level problems (card
// validation, judge score parsing fallbacks) are reported as values, not
// exceptions; Error is for operations that cannot produce a result.
enum class Errc {
  MalformedJson,
  UnknownField,
  KindMismatch,
  InvalidConfidence,
  EmptyDocument,
  EmptyMetadata,
  EmptyInput,
  LengthMismatch,
  DegenerateInput,
  EmptyPool,
  TagAbsent,
  ProviderUnavailable,
  AuthError,
  RateLimited,
  ServiceError,
  Timeout,
  NoRelevantChunks,
  EmptyAfterFilter,
  HttpError,
  StructuringFailed,
  JudgeParseError,
  CoverageMismatch,
  MalformedTrace,
  InvalidConfig,
  ValidationFailed,
  IoError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
  Error(Errc code, std::string message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::MalformedJson: return "MalformedJson";
    case Errc::UnknownField: return "UnknownField";
    case Errc::KindMismatch: return "KindMismatch";
    case Errc::InvalidConfidence: return "InvalidConfidence";
    case Errc::EmptyDocument: return "EmptyDocument";
    case Errc::EmptyMetadata: return "EmptyMetadata";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::TagAbsent: return "TagAbsent";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::ServiceError: return "ServiceError";
    case Errc::Timeout: return "Timeout";
    case Errc::NoRelevantChunks: return "NoRelevantChunks";
    case Errc::EmptyAfterFilter: return "EmptyAfterFilter";
    case Errc::HttpError: return "HttpError";
    case Errc::StructuringFailed: return "StructuringFailed";
    case Errc::JudgeParseError: return "JudgeParseError";
    case Errc::CoverageMismatch: return "CoverageMismatch";
    case Errc::MalformedTrace: return "MalformedTrace";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ValidationFailed: return "ValidationFailed";
    case Errc::IoError: return "IoError";
  }
  return "Error";
}

}  // namespace cardforge
