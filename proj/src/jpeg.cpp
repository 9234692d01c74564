#include "dicoderma/jpeg.hpp"

#include <algorithm>
#include <stdexcept>

#include "dicoderma/error.hpp"
#include "dicoderma/exif.hpp"

namespace dicoderma {
namespace {

constexpr std::uint8_t kAsciiPrefix[8] = {'A', 'S', 'C', 'I', 'I', 0, 0, 0};
constexpr std::uint8_t kUnicodePrefix[8] = {'U', 'N', 'I', 'C', 'O', 'D', 'E', 0};

bool is_frame_marker(std::uint8_t m) {
  return m >= 0xC0 && m <= 0xCF && m != 0xC4 && m != 0xC8 && m != 0xCC;
}

bool is_standalone_marker(std::uint8_t m) { return m == 0x01 || (m >= 0xD0 && m <= 0xD7); }

bool starts_with(ByteView bytes, ByteView prefix) {
  return bytes.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), bytes.begin());
}

ImageDescriptor read_frame_header(std::uint8_t m, ByteView payload) {
  if (payload.size() < 6) throw Error(ErrorCode::TruncatedFile, "frame header truncated");
  ImageDescriptor frame;
  frame.bits_per_sample = payload[0];
  frame.rows = load_u16(&payload[1], ByteOrder::Big);
  frame.columns = load_u16(&payload[3], ByteOrder::Big);
  frame.components = payload[5];
  frame.baseline = m == marker::kSof0;
  if (frame.rows == 0 || frame.columns == 0) {
    throw Error(ErrorCode::UnsupportedFrame, "frame header declares a zero dimension");
  }
  if (frame.components != 1 && frame.components != 3) {
    throw Error(ErrorCode::UnsupportedFrame,
                "unsupported component count " + std::to_string(frame.components));
  }
  return frame;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string decode_ucs2(ByteView units, ByteOrder order) {
  std::string out;
  for (std::size_t i = 0; i + 1 < units.size(); i += 2) {
    char32_t cp = load_u16(&units[i], order);
    if (cp >= 0xD800 && cp <= 0xDBFF && i + 3 < units.size()) {
      const char32_t low = load_u16(&units[i + 2], order);
      if (low >= 0xDC00 && low <= 0xDFFF) {
        cp = 0x10000 + ((cp - 0xD800) << 10) + (low - 0xDC00);
        i += 2;
      }
    }
    append_utf8(out, cp);
  }
  while (!out.empty() && out.back() == '\0') out.pop_back();
  return out;
}

}  // namespace

JpegDocument parse_jpeg(ByteView bytes, ParseScope scope) {
  if (bytes.size() < 2 || bytes[0] != 0xFF || bytes[1] != marker::kSoi) {
    throw Error(ErrorCode::NotAJpeg, "missing JPEG SOI marker");
  }
  JpegDocument doc;
  bool have_frame = false;
  std::size_t pos = 2;
  while (true) {
    const std::size_t segment_start = pos;
    std::uint32_t fill = 0;
    while (pos + 1 < bytes.size() && bytes[pos] == 0xFF && bytes[pos + 1] == 0xFF) {
      ++fill;
      ++pos;
    }
    if (pos + 2 > bytes.size()) throw Error(ErrorCode::TruncatedFile, "stream ends before SOS");
    if (bytes[pos] != 0xFF) {
      throw Error(ErrorCode::NotAJpeg, "expected a marker at offset " + std::to_string(pos));
    }
    const std::uint8_t m = bytes[pos + 1];

    if (m == marker::kSos) {
      if (!have_frame) throw Error(ErrorCode::MissingFrameHeader, "no frame header before SOS");
      if (scope == ParseScope::WholeFile) {
        doc.scan_data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(segment_start), bytes.end());
      }
      return doc;
    }
    if (m == marker::kEoi || m == marker::kSoi || m == 0x00) {
      if (!have_frame) throw Error(ErrorCode::MissingFrameHeader, "no frame header in stream");
      throw Error(ErrorCode::TruncatedFile, "no scan data before end of image");
    }

    Segment seg;
    seg.marker = m;
    seg.fill_bytes = fill;
    if (is_standalone_marker(m)) {
      seg.standalone = true;
      pos += 2;
    } else {
      if (pos + 4 > bytes.size()) throw Error(ErrorCode::TruncatedFile, "segment length truncated");
      const std::uint16_t length = load_u16(&bytes[pos + 2], ByteOrder::Big);
      if (length < 2 || pos + 2 + length > bytes.size()) {
        throw Error(ErrorCode::TruncatedFile, "segment length exceeds remaining bytes");
      }
      seg.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + 2 + length));
      pos += 2 + length;
      if (is_frame_marker(m) && !have_frame) {
        doc.frame = read_frame_header(m, seg.payload);
        have_frame = true;
      }
    }
    doc.segments.push_back(std::move(seg));
  }
}

Bytes serialize_jpeg(const JpegDocument& doc) {
  Bytes out{0xFF, marker::kSoi};
  for (const auto& seg : doc.segments) {
    out.insert(out.end(), seg.fill_bytes, 0xFF);
    out.push_back(0xFF);
    out.push_back(seg.marker);
    if (seg.standalone) continue;
    if (seg.payload.size() > kMaxSegmentPayload) {
      throw std::length_error("segment payload exceeds 65533 bytes");
    }
    append_u16(out, static_cast<std::uint16_t>(seg.payload.size() + 2), ByteOrder::Big);
    append(out, seg.payload);
  }
  append(out, doc.scan_data);
  return out;
}

std::optional<std::size_t> find_exif_segment(const JpegDocument& doc) {
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    const auto& seg = doc.segments[i];
    if (seg.marker == marker::kApp1 && starts_with(seg.payload, kExifHeader)) return i;
  }
  return std::nullopt;
}

std::optional<std::string> read_user_comment(const JpegDocument& doc) {
  const auto index = find_exif_segment(doc);
  if (!index) return std::nullopt;
  const ByteView payload = doc.segments[*index].payload;
  const ExifBlock block = decode_exif(payload.subspan(sizeof kExifHeader));
  const IfdEntry* entry = find_entry(block.exif_ifd, exif_tag::kUserComment);
  if (!entry || entry->value.size() < 8) return std::nullopt;

  const ByteView value = entry->value;
  const ByteView text = value.subspan(8);
  if (starts_with(value, kAsciiPrefix)) {
    std::string out = to_string(text);
    while (!out.empty() && out.back() == '\0') out.pop_back();
    return out;
  }
  if (starts_with(value, kUnicodePrefix)) return decode_ucs2(text, block.byte_order);
  return std::nullopt;
}

JpegDocument with_user_comment(const JpegDocument& doc, std::string_view comment) {
  if (std::any_of(comment.begin(), comment.end(),
                  [](char c) { return static_cast<unsigned char>(c) >= 0x80; })) {
    throw std::invalid_argument("UserComment text must be ASCII");
  }
  JpegDocument out = doc;
  const auto index = find_exif_segment(doc);

  ExifBlock block;
  if (index) block = decode_exif(ByteView(doc.segments[*index].payload).subspan(sizeof kExifHeader));

  IfdEntry entry{exif_tag::kUserComment, tiff_type::kUndefined,
                 static_cast<std::uint32_t>(comment.size() + 8), {}};
  append(entry.value, kAsciiPrefix);
  append(entry.value, as_bytes(comment));
  upsert_entry(block.exif_ifd, std::move(entry));

  Bytes payload(std::begin(kExifHeader), std::end(kExifHeader));
  append(payload, encode_exif(block));
  if (payload.size() > kMaxSegmentPayload) {
    throw Error(ErrorCode::OversizeExif, "rebuilt EXIF block is " + std::to_string(payload.size()) +
                                             " bytes; an APP1 segment holds at most 65533");
  }

  if (index) {
    out.segments[*index].payload = std::move(payload);
  } else {
    std::size_t at = 0;
    static constexpr std::uint8_t kJfif[5] = {'J', 'F', 'I', 'F', 0};
    if (!out.segments.empty() && out.segments[0].marker == marker::kApp0 &&
        starts_with(out.segments[0].payload, kJfif)) {
      at = 1;
    }
    Segment seg;
    seg.marker = marker::kApp1;
    seg.payload = std::move(payload);
    out.segments.insert(out.segments.begin() + static_cast<std::ptrdiff_t>(at), std::move(seg));
  }
  return out;
}

}  // namespace dicoderma
