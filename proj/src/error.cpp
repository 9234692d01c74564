#include "dicoderma/error.hpp"

namespace dicoderma {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotAJpeg: return "NotAJpeg";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::MissingFrameHeader: return "MissingFrameHeader";
    case ErrorCode::UnsupportedFrame: return "UnsupportedFrame";
    case ErrorCode::MalformedExif: return "MalformedExif";
    case ErrorCode::OversizeExif: return "OversizeExif";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::NotDicoderma: return "NotDicoderma";
    case ErrorCode::InvalidMetadata: return "InvalidMetadata";
    case ErrorCode::MissingSecret: return "MissingSecret";
    case ErrorCode::UidTooLong: return "UidTooLong";
    case ErrorCode::NotBaselineJpeg: return "NotBaselineJpeg";
    case ErrorCode::FragmentTooLarge: return "FragmentTooLarge";
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::PermissionDenied: return "PermissionDenied";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace dicoderma
