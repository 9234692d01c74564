#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dicoderma/bytes.hpp"

namespace dicoderma {

namespace exif_tag {
inline constexpr std::uint16_t kExifIfdPointer = 0x8769;
inline constexpr std::uint16_t kGpsIfdPointer = 0x8825;
inline constexpr std::uint16_t kInteropIfdPointer = 0xA005;
inline constexpr std::uint16_t kThumbnailOffset = 0x0201;
inline constexpr std::uint16_t kThumbnailLength = 0x0202;
inline constexpr std::uint16_t kUserComment = 0x9286;
}  // namespace exif_tag

namespace tiff_type {
inline constexpr std::uint16_t kByte = 1;
inline constexpr std::uint16_t kAscii = 2;
inline constexpr std::uint16_t kShort = 3;
inline constexpr std::uint16_t kLong = 4;
inline constexpr std::uint16_t kRational = 5;
inline constexpr std::uint16_t kUndefined = 7;
inline constexpr std::uint16_t kSRational = 10;
}  // namespace tiff_type

/// Size in bytes of one value of a TIFF field type, or 0 if the type is unknown.
std::size_t tiff_type_size(std::uint16_t field_type);

/// A 12-byte IFD entry with its value held in the block's byte order.
/// For entries of unknown type `value` holds the raw 4-byte value field.
struct IfdEntry {
  std::uint16_t tag = 0;
  std::uint16_t field_type = 0;
  std::uint32_t count = 0;
  Bytes value;

  bool operator==(const IfdEntry&) const = default;
};

using Ifd = std::vector<IfdEntry>;

/// Decoded TIFF structure of an EXIF APP1 payload. Structural entries (sub-IFD
/// pointers and thumbnail offset/length) are not stored; they are regenerated
/// from the tree on encode.
struct ExifBlock {
  ByteOrder byte_order = ByteOrder::Little;
  Ifd ifd0;
  Ifd exif_ifd;
  Ifd gps_ifd;
  Ifd interop_ifd;
  std::optional<Ifd> ifd1;
  Bytes thumbnail;

  bool operator==(const ExifBlock&) const = default;
};

inline constexpr std::uint8_t kExifHeader[6] = {'E', 'x', 'i', 'f', 0, 0};

/// Decodes a TIFF stream (the APP1 payload after "Exif\0\0").
/// Throws Error{MalformedExif}.
ExifBlock decode_exif(ByteView tiff);

/// Serializes with entries sorted by tag and every out-of-line value at an
/// even offset.
Bytes encode_exif(const ExifBlock& block);

const IfdEntry* find_entry(const Ifd& ifd, std::uint16_t tag);

/// Inserts or replaces the entry with the same tag.
void upsert_entry(Ifd& ifd, IfdEntry entry);

}  // namespace dicoderma
