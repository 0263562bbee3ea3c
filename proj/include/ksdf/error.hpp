#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ksdf {

enum class ErrorCode {
  ParseError,
  EmptyMesh,
  ZeroExtent,
  IoError,
  InvalidMix,
  InvalidArgument,
  InsufficientInterior,
  DimensionMismatch,
  DivergedError,
  BadMagic,
  VersionUnsupported,
  ChecksumMismatch,
  TruncatedFile,
  DegenerateUnion,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::ZeroExtent: return "ZeroExtent";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidMix: return "InvalidMix";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InsufficientInterior: return "InsufficientInterior";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DivergedError: return "DivergedError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DegenerateUnion: return "DegenerateUnion";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// message is prefixed with the code name so CLI output is greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ksdf
