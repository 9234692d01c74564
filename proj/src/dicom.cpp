#include "dicoderma/dicom.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <stdexcept>

#include "dicoderma/error.hpp"

namespace dicoderma::dicom {
namespace {

struct DictEntry {
  Tag tag;
  Vr vr;
};

// Only the attributes this writer emits.
constexpr std::array<DictEntry, 44> kDictionary{{
    {{0x0002, 0x0000}, "UL"}, {{0x0002, 0x0001}, "OB"}, {{0x0002, 0x0002}, "UI"},
    {{0x0002, 0x0003}, "UI"}, {{0x0002, 0x0010}, "UI"}, {{0x0002, 0x0012}, "UI"},
    {{0x0002, 0x0013}, "SH"}, {{0x0008, 0x0005}, "CS"}, {{0x0008, 0x0008}, "CS"},
    {{0x0008, 0x0016}, "UI"}, {{0x0008, 0x0018}, "UI"}, {{0x0008, 0x0020}, "DA"},
    {{0x0008, 0x0030}, "TM"}, {{0x0008, 0x0050}, "SH"}, {{0x0008, 0x0060}, "CS"},
    {{0x0008, 0x0064}, "CS"}, {{0x0008, 0x0090}, "PN"}, {{0x0008, 0x1030}, "LO"},
    {{0x0010, 0x0010}, "PN"}, {{0x0010, 0x0020}, "LO"}, {{0x0010, 0x0030}, "DA"},
    {{0x0010, 0x0040}, "CS"}, {{0x0012, 0x0062}, "CS"}, {{0x0012, 0x0063}, "LO"},
    {{0x0020, 0x000D}, "UI"}, {{0x0020, 0x000E}, "UI"}, {{0x0020, 0x0010}, "SH"},
    {{0x0020, 0x0011}, "IS"}, {{0x0020, 0x0013}, "IS"}, {{0x0020, 0x0020}, "CS"},
    {{0x0028, 0x0002}, "US"}, {{0x0028, 0x0004}, "CS"}, {{0x0028, 0x0006}, "US"},
    {{0x0028, 0x0010}, "US"}, {{0x0028, 0x0011}, "US"}, {{0x0028, 0x0100}, "US"},
    {{0x0028, 0x0101}, "US"}, {{0x0028, 0x0102}, "US"}, {{0x0028, 0x0103}, "US"},
    {{0x0028, 0x2110}, "CS"}, {{0x7FE0, 0x0010}, "OB"}, {{0xFFFE, 0xE000}, "UN"},
    {{0xFFFE, 0xE00D}, "UN"}, {{0xFFFE, 0xE0DD}, "UN"},
}};

// Fixed project number appended to the UID root for ImplementationClassUID.
constexpr std::string_view kImplementationNumber = "196364213871203622436157683592018733265";

constexpr Tag kPixelData{0x7FE0, 0x0010};
constexpr Tag kItem{0xFFFE, 0xE000};
constexpr Tag kSequenceDelimiter{0xFFFE, 0xE0DD};

void append_tag(Bytes& out, Tag tag) {
  append_u16(out, tag.group, ByteOrder::Little);
  append_u16(out, tag.element, ByteOrder::Little);
}

bool needs_specific_character_set(const ClinicalMetadata& m) {
  for (Field f : kAllFields) {
    if (auto v = get_field(m, f); v && std::any_of(v->begin(), v->end(), [](char c) {
          return static_cast<unsigned char>(c) >= 0x80;
        })) {
      return true;
    }
  }
  return false;
}

}  // namespace

std::string to_string(Tag tag) {
  char buf[12];
  std::snprintf(buf, sizeof buf, "(%04X,%04X)", tag.group, tag.element);
  return buf;
}

bool Vr::long_length() const {
  const auto v = view();
  return v == "OB" || v == "OW" || v == "OF" || v == "SQ" || v == "UT" || v == "UN";
}

bool Vr::is_string() const {
  const auto v = view();
  return v == "AE" || v == "AS" || v == "CS" || v == "DA" || v == "DS" || v == "DT" ||
         v == "IS" || v == "LO" || v == "LT" || v == "PN" || v == "SH" || v == "ST" ||
         v == "TM" || v == "UI" || v == "UT";
}

std::optional<Vr> dictionary_vr(Tag tag) {
  for (const auto& e : kDictionary) {
    if (e.tag == tag) return e.vr;
  }
  return std::nullopt;
}

void DicomDataset::insert(DicomElement element) {
  if (element.value.size() % 2) throw std::logic_error("odd value length for " + to_string(element.tag));
  auto& list = element.tag.group == 0x0002 ? file_meta_ : elements_;
  auto it = std::lower_bound(list.begin(), list.end(), element.tag,
                             [](const DicomElement& e, Tag t) { return e.tag < t; });
  if (it != list.end() && it->tag == element.tag) {
    *it = std::move(element);
  } else {
    list.insert(it, std::move(element));
  }
}

void DicomDataset::set_string(Tag tag, std::string_view value) {
  const auto vr = dictionary_vr(tag);
  if (!vr || !vr->is_string()) throw std::logic_error("no string VR for " + to_string(tag));
  Bytes bytes(value.begin(), value.end());
  if (bytes.size() % 2) bytes.push_back(vr->view() == "UI" ? '\0' : ' ');
  insert({tag, *vr, std::move(bytes)});
}

void DicomDataset::set_us(Tag tag, std::uint16_t value) {
  const auto vr = dictionary_vr(tag);
  if (!vr || vr->view() != "US") throw std::logic_error("no US VR for " + to_string(tag));
  Bytes bytes;
  append_u16(bytes, value, ByteOrder::Little);
  insert({tag, *vr, std::move(bytes)});
}

void DicomDataset::set_bytes(Tag tag, Bytes value) {
  const auto vr = dictionary_vr(tag);
  if (!vr) throw std::logic_error("unknown tag " + to_string(tag));
  if (value.size() % 2) value.push_back(0);
  insert({tag, *vr, std::move(value)});
}

const DicomElement* DicomDataset::find(Tag tag) const {
  const auto& list = tag.group == 0x0002 ? file_meta_ : elements_;
  auto it = std::find_if(list.begin(), list.end(), [&](const DicomElement& e) { return e.tag == tag; });
  return it == list.end() ? nullptr : &*it;
}

std::optional<std::string> DicomDataset::get_string(Tag tag) const {
  const auto* e = find(tag);
  if (!e) return std::nullopt;
  std::string s(e->value.begin(), e->value.end());
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  return s;
}

std::string implementation_class_uid(std::string_view root) {
  std::string uid = std::string(root) + "." + std::string(kImplementationNumber);
  if (uid.size() > 64) throw Error(ErrorCode::UidTooLong, "ImplementationClassUID exceeds 64 characters");
  return uid;
}

DicomDataset build_sc_dataset(const ClinicalMetadata& m, const ImageDescriptor& image, UidContext& ctx) {
  if (!image.baseline || image.bits_per_sample != 8) {
    throw Error(ErrorCode::NotBaselineJpeg,
                "only baseline (SOF0) JPEG can be stored with transfer syntax 1.2.840.10008.1.2.4.50");
  }
  if (auto issues = validate(m); !issues.empty()) throw InvalidMetadataError(std::move(issues));

  const std::string sop_instance = generate_uid(ctx);
  const std::string study_uid = m.study_instance_uid ? *m.study_instance_uid : generate_uid(ctx);
  const std::string series_uid = m.series_instance_uid ? *m.series_instance_uid : generate_uid(ctx);

  DicomDataset ds;
  ds.set_bytes({0x0002, 0x0001}, Bytes{0x00, 0x01});
  ds.set_string({0x0002, 0x0002}, uids::kSecondaryCaptureImageStorage);
  ds.set_string({0x0002, 0x0003}, sop_instance);
  ds.set_string({0x0002, 0x0010}, uids::kJpegBaselineProcess1);
  ds.set_string({0x0002, 0x0012}, implementation_class_uid(ctx.root));
  ds.set_string({0x0002, 0x0013}, kImplementationVersionName);

  if (needs_specific_character_set(m)) ds.set_string({0x0008, 0x0005}, "ISO_IR 192");
  ds.set_string({0x0008, 0x0008}, "DERIVED\\SECONDARY");
  ds.set_string({0x0008, 0x0016}, uids::kSecondaryCaptureImageStorage);
  ds.set_string({0x0008, 0x0018}, sop_instance);
  ds.set_string({0x0008, 0x0020}, m.study_date.value_or(""));
  ds.set_string({0x0008, 0x0030}, m.study_time.value_or(""));
  ds.set_string({0x0008, 0x0050}, "");
  ds.set_string({0x0008, 0x0060}, "OT");
  ds.set_string({0x0008, 0x0064}, "WSD");
  ds.set_string({0x0008, 0x0090}, "");
  if (m.study_description) ds.set_string({0x0008, 0x1030}, *m.study_description);

  ds.set_string({0x0010, 0x0010}, m.patient_name.value_or(""));
  ds.set_string({0x0010, 0x0020}, m.patient_id.value_or(""));
  ds.set_string({0x0010, 0x0030}, "");
  ds.set_string({0x0010, 0x0040}, m.patient_sex.value_or(""));
  if (m.deidentified) {
    ds.set_string({0x0012, 0x0062}, "YES");
    ds.set_string({0x0012, 0x0063}, "DICODERMA pseudonymization");
  }

  ds.set_string({0x0020, 0x000D}, study_uid);
  ds.set_string({0x0020, 0x000E}, series_uid);
  ds.set_string({0x0020, 0x0010}, "");
  ds.set_string({0x0020, 0x0011}, "1");
  ds.set_string({0x0020, 0x0013}, "1");
  ds.set_string({0x0020, 0x0020}, "");

  ds.set_us({0x0028, 0x0002}, image.components);
  ds.set_string({0x0028, 0x0004}, image.components == 3 ? "YBR_FULL_422" : "MONOCHROME2");
  if (image.components == 3) ds.set_us({0x0028, 0x0006}, 0);
  ds.set_us({0x0028, 0x0010}, image.rows);
  ds.set_us({0x0028, 0x0011}, image.columns);
  ds.set_us({0x0028, 0x0100}, 8);
  ds.set_us({0x0028, 0x0101}, 8);
  ds.set_us({0x0028, 0x0102}, 7);
  ds.set_us({0x0028, 0x0103}, 0);
  ds.set_string({0x0028, 0x2110}, "01");
  return ds;
}

Bytes encode_element(const DicomElement& element) {
  Bytes out;
  append_tag(out, element.tag);
  out.push_back(static_cast<std::uint8_t>(element.vr.code[0]));
  out.push_back(static_cast<std::uint8_t>(element.vr.code[1]));
  if (element.vr.long_length()) {
    append_u16(out, 0, ByteOrder::Little);
    append_u32(out, static_cast<std::uint32_t>(element.value.size()), ByteOrder::Little);
  } else {
    if (element.value.size() > 0xFFFF) throw std::length_error("value too long for short-form VR");
    append_u16(out, static_cast<std::uint16_t>(element.value.size()), ByteOrder::Little);
  }
  append(out, element.value);
  return out;
}

void check_fragment_size(std::size_t size) {
  if (size >= 0xFFFFFFFEull) {
    throw Error(ErrorCode::FragmentTooLarge, "JPEG stream too large for a single pixel data fragment");
  }
}

Bytes encode_part10(const DicomDataset& ds, ByteView jpeg_bytes) {
  check_fragment_size(jpeg_bytes.size());

  Bytes meta;
  for (const auto& e : ds.file_meta()) {
    if (e.tag == Tag{0x0002, 0x0000}) continue;
    append(meta, encode_element(e));
  }
  Bytes out(128, 0);
  out.insert(out.end(), {'D', 'I', 'C', 'M'});
  Bytes length;
  append_u32(length, static_cast<std::uint32_t>(meta.size()), ByteOrder::Little);
  append(out, encode_element({{0x0002, 0x0000}, "UL", length}));
  append(out, meta);

  for (const auto& e : ds.elements()) {
    if (e.tag >= kPixelData) break;
    append(out, encode_element(e));
  }

  append_tag(out, kPixelData);
  out.insert(out.end(), {'O', 'B', 0, 0});
  append_u32(out, 0xFFFFFFFF, ByteOrder::Little);
  append_tag(out, kItem);  // empty basic offset table
  append_u32(out, 0, ByteOrder::Little);
  const bool pad = jpeg_bytes.size() % 2 != 0;
  append_tag(out, kItem);
  append_u32(out, static_cast<std::uint32_t>(jpeg_bytes.size() + (pad ? 1 : 0)), ByteOrder::Little);
  append(out, jpeg_bytes);
  if (pad) out.push_back(0);
  append_tag(out, kSequenceDelimiter);
  append_u32(out, 0, ByteOrder::Little);
  return out;
}

Conversion convert_jpeg(ByteView jpeg_bytes, const ClinicalMetadata& m, UidContext& ctx) {
  const JpegDocument doc = parse_jpeg(jpeg_bytes);
  const DicomDataset ds = build_sc_dataset(m, get_image_descriptor(doc), ctx);
  return {encode_part10(ds, jpeg_bytes), *ds.get_string({0x0008, 0x0018})};
}

}  // namespace dicoderma::dicom
