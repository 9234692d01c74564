#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dicoderma/bytes.hpp"
#include "dicoderma/jpeg.hpp"
#include "dicoderma/metadata.hpp"
#include "dicoderma/uid.hpp"

namespace dicoderma::dicom {

struct Tag {
  std::uint16_t group = 0;
  std::uint16_t element = 0;

  auto operator<=>(const Tag&) const = default;
};

std::string to_string(Tag tag);

namespace uids {
inline constexpr std::string_view kSecondaryCaptureImageStorage = "1.2.840.10008.5.1.4.1.1.7";
inline constexpr std::string_view kJpegBaselineProcess1 = "1.2.840.10008.1.2.4.50";
}  // namespace uids

/// Implementation version name written to (0002,0013).
inline constexpr std::string_view kImplementationVersionName = "DICODERMA_0.1";

/// Two-letter value representation.
struct Vr {
  char code[2] = {'U', 'N'};

  constexpr Vr() = default;
  constexpr Vr(const char (&text)[3]) : code{text[0], text[1]} {}

  std::string_view view() const { return {code, 2}; }
  bool operator==(const Vr& other) const { return code[0] == other.code[0] && code[1] == other.code[1]; }
  /// OB, OW, OF, SQ, UT and UN use the 4-byte length form in explicit VR.
  bool long_length() const;
  bool is_string() const;
};

/// VR of a tag in the built-in dictionary, if the tag is known.
std::optional<Vr> dictionary_vr(Tag tag);

struct DicomElement {
  Tag tag;
  Vr vr;
  Bytes value;
};

/// Element list kept sorted by tag. Group 0002 lives in `file_meta`; the
/// transfer syntax is fixed to JPEG Baseline for this writer.
class DicomDataset {
 public:
  /// Pads to even length (UI with NUL, other strings with space).
  /// Throws std::logic_error if `tag` is not in the dictionary.
  void set_string(Tag tag, std::string_view value);
  void set_us(Tag tag, std::uint16_t value);
  void set_bytes(Tag tag, Bytes value);

  const DicomElement* find(Tag tag) const;
  /// Value with trailing padding removed.
  std::optional<std::string> get_string(Tag tag) const;

  const std::vector<DicomElement>& elements() const { return elements_; }
  const std::vector<DicomElement>& file_meta() const { return file_meta_; }
  std::string_view transfer_syntax() const { return uids::kJpegBaselineProcess1; }

 private:
  void insert(DicomElement element);

  std::vector<DicomElement> elements_;
  std::vector<DicomElement> file_meta_;
};

/// ImplementationClassUID for a given root: the root followed by a fixed
/// 128-bit project number.
std::string implementation_class_uid(std::string_view root);

/// Secondary Capture image dataset for an encapsulated baseline JPEG.
/// Throws Error{NotBaselineJpeg} or InvalidMetadataError.
DicomDataset build_sc_dataset(const ClinicalMetadata& m, const ImageDescriptor& image, UidContext& ctx);

/// Explicit VR little endian encoding of one element.
Bytes encode_element(const DicomElement& element);

/// Throws Error{FragmentTooLarge} for sizes >= 2^32 - 2.
void check_fragment_size(std::size_t size);

/// Preamble, file meta group, dataset and encapsulated PixelData holding
/// `jpeg_bytes` as a single fragment.
Bytes encode_part10(const DicomDataset& ds, ByteView jpeg_bytes);

struct Conversion {
  Bytes file;
  std::string sop_instance_uid;
};

/// parse -> build_sc_dataset -> encode_part10 over a complete JPEG file.
Conversion convert_jpeg(ByteView jpeg_bytes, const ClinicalMetadata& m, UidContext& ctx);

}  // namespace dicoderma::dicom
