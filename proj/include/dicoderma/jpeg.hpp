#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dicoderma/bytes.hpp"

namespace dicoderma {

namespace marker {
inline constexpr std::uint8_t kSoi = 0xD8;
inline constexpr std::uint8_t kEoi = 0xD9;
inline constexpr std::uint8_t kSos = 0xDA;
inline constexpr std::uint8_t kSof0 = 0xC0;
inline constexpr std::uint8_t kApp0 = 0xE0;
inline constexpr std::uint8_t kApp1 = 0xE1;
}  // namespace marker

/// Largest payload a length-prefixed segment can carry (the 16-bit length
/// field counts its own two bytes).
inline constexpr std::size_t kMaxSegmentPayload = 65533;

/// One marker segment between SOI and the first SOS.
struct Segment {
  std::uint8_t marker = 0;
  Bytes payload;
  /// Extra 0xFF fill bytes that preceded the marker in the source stream.
  std::uint32_t fill_bytes = 0;
  /// RSTn / TEM markers carry no length field.
  bool standalone = false;

  bool operator==(const Segment&) const = default;
};

struct ImageDescriptor {
  std::uint16_t rows = 0;
  std::uint16_t columns = 0;
  std::uint8_t components = 0;
  bool baseline = false;
  std::uint8_t bits_per_sample = 8;

  bool operator==(const ImageDescriptor&) const = default;
};

/// Segment-level model of a JPEG file. Entropy-coded data is never decoded:
/// everything from the first SOS marker to the end of the stream is kept as
/// one opaque block.
struct JpegDocument {
  std::vector<Segment> segments;
  Bytes scan_data;
  ImageDescriptor frame;

  bool operator==(const JpegDocument&) const = default;
};

enum class ParseScope {
  WholeFile,
  /// Stop at the first SOS; scan_data is left empty. Used by directory scans.
  HeadersOnly,
};

/// Throws Error{NotAJpeg | TruncatedFile | MissingFrameHeader | UnsupportedFrame}.
JpegDocument parse_jpeg(ByteView bytes, ParseScope scope = ParseScope::WholeFile);

Bytes serialize_jpeg(const JpegDocument& doc);

inline const ImageDescriptor& get_image_descriptor(const JpegDocument& doc) { return doc.frame; }

/// Index of the segment carrying EXIF (first APP1 starting with "Exif\0\0").
std::optional<std::size_t> find_exif_segment(const JpegDocument& doc);

/// Returns the decoded UserComment, or nullopt when there is no EXIF block,
/// no UserComment entry, or the character code is not ASCII/UNICODE.
/// Throws Error{MalformedExif} when the TIFF structure cannot be parsed.
std::optional<std::string> read_user_comment(const JpegDocument& doc);

/// Copy of `doc` whose EXIF UserComment is "ASCII\0\0\0" + comment. The EXIF
/// block is rebuilt from its decoded form; a minimal block is created when the
/// file has none. Throws std::invalid_argument for non-ASCII comments and
/// Error{OversizeExif} when the rebuilt APP1 no longer fits in one segment.
JpegDocument with_user_comment(const JpegDocument& doc, std::string_view comment);

inline Bytes write_user_comment(const JpegDocument& doc, std::string_view comment) {
  return serialize_jpeg(with_user_comment(doc, comment));
}

}  // namespace dicoderma
