#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dicoderma {

/// Failure categories surfaced by the library. The names are stable and
/// appear verbatim in CLI messages and service error bodies.
enum class ErrorCode {
  NotAJpeg,
  TruncatedFile,
  MissingFrameHeader,
  UnsupportedFrame,
  MalformedExif,
  OversizeExif,
  MalformedJson,
  NotDicoderma,
  InvalidMetadata,
  MissingSecret,
  UidTooLong,
  NotBaselineJpeg,
  FragmentTooLarge,
  RootNotFound,
  PermissionDenied,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dicoderma
