#include "dicoderma/metadata.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace dicoderma {
namespace {

using json = nlohmann::json;

struct FieldInfo {
  Field field;
  std::string_view keyword;
  std::string_view snake;
  std::optional<std::string> ClinicalMetadata::*member;
};

constexpr std::array<FieldInfo, 8> kStringFields{{
    {Field::PatientID, "PatientID", "patient_id", &ClinicalMetadata::patient_id},
    {Field::PatientName, "PatientName", "patient_name", &ClinicalMetadata::patient_name},
    {Field::PatientSex, "PatientSex", "patient_sex", &ClinicalMetadata::patient_sex},
    {Field::StudyDate, "StudyDate", "study_date", &ClinicalMetadata::study_date},
    {Field::StudyTime, "StudyTime", "study_time", &ClinicalMetadata::study_time},
    {Field::StudyDescription, "StudyDescription", "study_description",
     &ClinicalMetadata::study_description},
    {Field::StudyInstanceUID, "StudyInstanceUID", "study_instance_uid",
     &ClinicalMetadata::study_instance_uid},
    {Field::SeriesInstanceUID, "SeriesInstanceUID", "series_instance_uid",
     &ClinicalMetadata::series_instance_uid},
}};

constexpr std::string_view kDeidentifiedKey = "Deidentified";

bool is_keyword(std::string_view key) {
  return key == kDeidentifiedKey ||
         std::any_of(kStringFields.begin(), kStringFields.end(),
                     [&](const FieldInfo& f) { return f.keyword == key; });
}

bool is_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0x80, 0x800, 0x10000};
    if (cp < kMin[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

const FieldInfo* info(Field field) {
  for (const auto& f : kStringFields) {
    if (f.field == field) return &f;
  }
  return nullptr;
}

bool is_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

bool has_control_or_backslash(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x20 || u == 0x7F || c == '\\';
  });
}

bool is_version(std::string_view v) {
  const auto dot = v.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == v.size()) return false;
  return is_digits(v.substr(0, dot)) && is_digits(v.substr(dot + 1));
}

class Checker {
 public:
  void issue(std::string_view field, std::string_view rule, std::string message) {
    issues_.push_back({std::string(field), std::string(rule), std::move(message)});
  }

  void lo(std::string_view field, std::string_view v) {
    if (utf8_length(v) > 64) issue(field, "LO-maxlen", "LO value longer than 64 characters");
    if (has_control_or_backslash(v)) {
      issue(field, "LO-charset", "LO value contains a backslash or control character");
    }
  }

  void pn(std::string_view field, std::string_view v) {
    if (has_control_or_backslash(v)) {
      issue(field, "PN-charset", "PN value contains a backslash or control character");
    }
    std::size_t groups = 0;
    std::size_t start = 0;
    while (true) {
      const auto end = v.find('=', start);
      const auto group = v.substr(start, end == std::string_view::npos ? v.npos : end - start);
      ++groups;
      if (utf8_length(group) > 64) {
        issue(field, "PN-maxlen", "PN component group longer than 64 characters");
      }
      if (std::count(group.begin(), group.end(), '^') > 4) {
        issue(field, "PN-components", "PN component group has more than 5 components");
      }
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    if (groups > 3) issue(field, "PN-components", "PN value has more than 3 component groups");
  }

  void sex(std::string_view field, std::string_view v) {
    if (v != "M" && v != "F" && v != "O") {
      issue(field, "CS-codeset", "PatientSex must be one of M, F, O");
    }
  }

  void da(std::string_view field, std::string_view v) {
    if (v.size() != 8 || !is_digits(v)) {
      issue(field, "DA-format", "DA value must be YYYYMMDD");
    } else if (!is_valid_da(v)) {
      issue(field, "DA-calendar", "DA value is not a calendar date");
    }
  }

  void tm(std::string_view field, std::string_view v) {
    // HH[MM[SS[.F{1,6}]]]
    const auto dot = v.find('.');
    const auto whole = v.substr(0, dot);
    bool ok = is_digits(whole) && (whole.size() == 2 || whole.size() == 4 || whole.size() == 6);
    if (dot != std::string_view::npos) {
      const auto frac = v.substr(dot + 1);
      ok = ok && whole.size() == 6 && !frac.empty() && frac.size() <= 6 && is_digits(frac);
    }
    if (!ok) {
      issue(field, "TM-format", "TM value must be HH, HHMM, HHMMSS or HHMMSS.FFFFFF");
      return;
    }
    const bool in_range = to_int(whole.substr(0, 2)) < 24 &&
                          (whole.size() < 4 || to_int(whole.substr(2, 2)) < 60) &&
                          (whole.size() < 6 || to_int(whole.substr(4, 2)) <= 60);
    if (!in_range) issue(field, "TM-range", "TM component out of range");
  }

  void ui(std::string_view field, std::string_view v) {
    if (v.size() > 64) issue(field, "UI-maxlen", "UI value longer than 64 characters");
    if (!is_valid_uid(v)) {
      issue(field, "UI-grammar", "UI value must be dotted decimal without leading zeros");
    }
  }

  std::vector<ValidationIssue> take() { return std::move(issues_); }

 private:
  std::vector<ValidationIssue> issues_;
};

std::string issues_summary(const std::vector<ValidationIssue>& issues) {
  std::string out = "invalid metadata:";
  for (const auto& i : issues) out += " " + i.field + " (" + i.rule + ")";
  return out;
}

}  // namespace

InvalidMetadataError::InvalidMetadataError(std::vector<ValidationIssue> issues)
    : Error(ErrorCode::InvalidMetadata, issues_summary(issues)), issues_(std::move(issues)) {}

std::string_view keyword(Field field) {
  if (field == Field::Deidentified) return kDeidentifiedKey;
  return info(field)->keyword;
}

std::optional<Field> field_from_name(std::string_view name) {
  for (const auto& f : kStringFields) {
    if (name == f.keyword || name == f.snake) return f.field;
  }
  if (name == kDeidentifiedKey || name == "deidentified") return Field::Deidentified;
  if (name == "diagnosis") return Field::StudyDescription;
  return std::nullopt;
}

std::optional<std::string> get_field(const ClinicalMetadata& m, Field field) {
  if (field == Field::Deidentified) return m.deidentified ? "true" : "false";
  return m.*(info(field)->member);
}

void set_field(ClinicalMetadata& m, Field field, std::optional<std::string> value) {
  if (field == Field::Deidentified) {
    m.deidentified = value && (*value == "true" || *value == "1" || *value == "yes");
    return;
  }
  m.*(info(field)->member) = std::move(value);
}

bool is_valid_da(std::string_view v) {
  if (v.size() != 8 || !is_digits(v)) return false;
  const int year = to_int(v.substr(0, 4));
  const int month = to_int(v.substr(4, 2));
  const int day = to_int(v.substr(6, 2));
  if (month < 1 || month > 12 || day < 1) return false;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  const int limit = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
  return day <= limit;
}

bool is_valid_uid(std::string_view v) {
  if (v.empty() || v.size() > 64) return false;
  std::size_t start = 0;
  while (true) {
    const auto end = v.find('.', start);
    const auto part = v.substr(start, end == std::string_view::npos ? v.npos : end - start);
    if (part.empty() || !is_digits(part)) return false;
    if (part.size() > 1 && part[0] == '0') return false;
    if (end == std::string_view::npos) return true;
    start = end + 1;
  }
}

std::vector<ValidationIssue> validate(const ClinicalMetadata& m) {
  Checker check;
  if (!is_version(m.schema_version)) {
    check.issue(kMarkerKey, "version-format", "schema version must look like 1.0");
  }
  for (const auto& f : kStringFields) {
    if (const auto& v = m.*(f.member); v && !is_utf8(*v)) {
      check.issue(f.keyword, "charset-utf8", "value is not valid UTF-8");
    }
  }
  if (m.patient_id) check.lo("PatientID", *m.patient_id);
  if (m.patient_name) check.pn("PatientName", *m.patient_name);
  if (m.patient_sex) check.sex("PatientSex", *m.patient_sex);
  if (m.study_date) check.da("StudyDate", *m.study_date);
  if (m.study_time) check.tm("StudyTime", *m.study_time);
  if (m.study_description) check.lo("StudyDescription", *m.study_description);
  if (m.study_instance_uid) check.ui("StudyInstanceUID", *m.study_instance_uid);
  if (m.series_instance_uid) check.ui("SeriesInstanceUID", *m.series_instance_uid);

  if (!m.extras.is_object()) {
    check.issue("extras", "extras-conflict", "extras must be a JSON object");
  } else {
    for (const auto& [key, _] : m.extras.items()) {
      if (key == kMarkerKey || is_keyword(key) ||
          std::any_of(key.begin(), key.end(), [](char c) { return static_cast<unsigned char>(c) >= 0x80; })) {
        check.issue(key, "extras-conflict", "extra key collides with a known field or is not ASCII");
      }
    }
  }
  return check.take();
}

std::string encode_metadata(const ClinicalMetadata& m) {
  if (auto issues = validate(m); !issues.empty()) throw InvalidMetadataError(std::move(issues));
  // nlohmann's object type is an std::map, so keys come out in byte order.
  json doc = m.extras;
  for (const auto& f : kStringFields) {
    if (const auto& v = m.*(f.member)) doc[std::string(f.keyword)] = *v;
  }
  if (m.deidentified) doc[std::string(kDeidentifiedKey)] = true;
  doc[std::string(kMarkerKey)] = m.schema_version;
  return doc.dump(-1, ' ', /*ensure_ascii=*/true);
}

ClinicalMetadata decode_metadata(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains(kMarkerKey)) {
    throw Error(ErrorCode::NotDicoderma, "payload has no \"dicoderma\" key");
  }

  ClinicalMetadata m;
  std::vector<ValidationIssue> type_issues;
  auto type_issue = [&](std::string_view key, std::string_view expected) {
    type_issues.push_back({std::string(key), "type", std::string(key) + " must be a " + std::string(expected)});
  };

  m.extras = json::object();
  for (auto& [key, value] : doc.items()) {
    if (key == kMarkerKey) {
      if (value.is_string()) {
        m.schema_version = value.get<std::string>();
      } else {
        type_issue(key, "string");
      }
    } else if (key == kDeidentifiedKey) {
      if (value.is_boolean()) {
        m.deidentified = value.get<bool>();
      } else {
        type_issue(key, "boolean");
      }
    } else if (const auto field = field_from_name(key);
               field && info(*field) && info(*field)->keyword == key) {
      if (value.is_string()) {
        m.*(info(*field)->member) = value.get<std::string>();
      } else {
        type_issue(key, "string");
      }
    } else {
      m.extras[key] = value;
    }
  }

  auto issues = validate(m);
  issues.insert(issues.begin(), type_issues.begin(), type_issues.end());
  if (!issues.empty()) throw InvalidMetadataError(std::move(issues));
  return m;
}

bool detect(const std::optional<std::string>& text) noexcept {
  if (!text) return false;
  try {
    const json doc = json::parse(*text, nullptr, /*allow_exceptions=*/false);
    if (!doc.is_object()) return false;
    const auto it = doc.find(kMarkerKey);
    return it != doc.end() && it->is_string() && is_version(it->get<std::string>());
  } catch (...) {
    return false;
  }
}

}  // namespace dicoderma
