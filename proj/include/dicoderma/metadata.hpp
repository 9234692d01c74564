#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dicoderma/error.hpp"

namespace dicoderma {

inline constexpr std::string_view kSchemaVersion = "1.0";
inline constexpr std::string_view kMarkerKey = "dicoderma";

/// Clinical tags carried in the EXIF UserComment. Every field maps onto one
/// DICOM attribute; the JSON key is the attribute keyword.
struct ClinicalMetadata {
  std::string schema_version{kSchemaVersion};
  std::optional<std::string> patient_id;           // (0010,0020) LO
  std::optional<std::string> patient_name;         // (0010,0010) PN
  std::optional<std::string> patient_sex;          // (0010,0040) CS
  std::optional<std::string> study_date;           // (0008,0020) DA
  std::optional<std::string> study_time;           // (0008,0030) TM
  std::optional<std::string> study_description;    // (0008,1030) LO, the diagnosis
  std::optional<std::string> study_instance_uid;   // (0020,000D) UI
  std::optional<std::string> series_instance_uid;  // (0020,000E) UI
  bool deidentified = false;
  /// Unrecognised keys, re-emitted on encode.
  nlohmann::json extras = nlohmann::json::object();

  bool operator==(const ClinicalMetadata&) const = default;
};

enum class Field {
  PatientID,
  PatientName,
  PatientSex,
  StudyDate,
  StudyTime,
  StudyDescription,
  StudyInstanceUID,
  SeriesInstanceUID,
  Deidentified,
};

inline constexpr Field kAllFields[] = {
    Field::PatientID,        Field::PatientName,        Field::PatientSex,
    Field::StudyDate,        Field::StudyTime,          Field::StudyDescription,
    Field::StudyInstanceUID, Field::SeriesInstanceUID,  Field::Deidentified,
};

/// DICOM keyword used as the JSON key.
std::string_view keyword(Field field);

/// Accepts the DICOM keyword ("StudyDescription"), the snake_case field name
/// ("study_description") or the alias "diagnosis".
std::optional<Field> field_from_name(std::string_view name);

/// Text form of a field; Deidentified renders as "true" or "false".
std::optional<std::string> get_field(const ClinicalMetadata& m, Field field);

/// Empty optional clears the field.
void set_field(ClinicalMetadata& m, Field field, std::optional<std::string> value);

struct ValidationIssue {
  std::string field;
  std::string rule;
  std::string message;

  bool operator==(const ValidationIssue&) const = default;
};

class InvalidMetadataError : public Error {
 public:
  explicit InvalidMetadataError(std::vector<ValidationIssue> issues);
  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ValidationIssue> issues_;
};

/// Checks every value against its DICOM value-representation rules.
/// Rule identifiers: version-format, LO-maxlen, LO-charset, PN-maxlen,
/// PN-charset, PN-components, CS-codeset, DA-format, DA-calendar, TM-format,
/// TM-range, UI-maxlen, UI-grammar, charset-utf8, extras-conflict.
std::vector<ValidationIssue> validate(const ClinicalMetadata& m);

/// Canonical JSON: sorted keys, no whitespace, non-ASCII escaped as \uXXXX.
/// Throws InvalidMetadataError.
std::string encode_metadata(const ClinicalMetadata& m);

/// Throws Error{MalformedJson | NotDicoderma} or InvalidMetadataError.
ClinicalMetadata decode_metadata(std::string_view text);

/// True iff `text` is a JSON object whose "dicoderma" member is a version
/// string. Never throws.
bool detect(const std::optional<std::string>& text) noexcept;

// Value-representation checks shared with the DICOM writer.
bool is_valid_da(std::string_view value);
bool is_valid_uid(std::string_view value);

}  // namespace dicoderma
