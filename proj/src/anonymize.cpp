#include "dicoderma/anonymize.hpp"

#include <algorithm>
#include <array>

#include "dicoderma/crypto.hpp"

namespace dicoderma {

std::string pseudonym(std::string_view secret, std::string_view patient_id) {
  return hmac_sha256_hex(as_bytes(secret), as_bytes(patient_id)).substr(0, 16);
}

bool is_identifying_extra(std::string_view key) {
  static constexpr std::array<std::string_view, 16> kKeys = {
      "AccessionNumber",      "InstitutionName",       "InstitutionAddress",
      "OtherPatientIDs",      "OtherPatientNames",     "PatientAddress",
      "PatientBirthDate",     "PatientBirthName",      "PatientMotherBirthName",
      "PatientTelephoneNumbers", "ReferringPhysicianName", "PerformingPhysicianName",
      "OperatorsName",        "StudyID",               "IssuerOfPatientID",
      "MedicalRecordLocator",
  };
  return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
}

Anonymizer::Anonymizer(AnonymizationPolicy policy, UidContext uids)
    : policy_(std::move(policy)), uids_(std::move(uids)) {
  if (policy_.pseudonymize_id && policy_.secret.empty()) {
    throw Error(ErrorCode::MissingSecret, "pseudonymizing PatientID requires a secret");
  }
}

std::string Anonymizer::replace_uid(const std::string& original) {
  auto [it, inserted] = uid_map_.try_emplace(original);
  if (inserted) it->second = generate_uid(uids_);
  return it->second;
}

ClinicalMetadata Anonymizer::apply(const ClinicalMetadata& m) {
  if (m.deidentified) return m;
  ClinicalMetadata out = m;

  if (policy_.drop_name) out.patient_name.reset();
  if (policy_.pseudonymize_id && out.patient_id) {
    out.patient_id = pseudonym(policy_.secret, *out.patient_id);
  }
  switch (policy_.date_handling) {
    case DateHandling::Keep:
      break;
    case DateHandling::YearOnly:
      if (out.study_date) out.study_date = out.study_date->substr(0, 4) + "0101";
      out.study_time.reset();
      break;
    case DateHandling::Drop:
      out.study_date.reset();
      out.study_time.reset();
      break;
  }
  if (out.study_instance_uid) out.study_instance_uid = replace_uid(*out.study_instance_uid);
  if (out.series_instance_uid) out.series_instance_uid = replace_uid(*out.series_instance_uid);

  for (auto it = out.extras.begin(); it != out.extras.end();) {
    it = is_identifying_extra(it.key()) ? out.extras.erase(it) : std::next(it);
  }
  out.deidentified = true;
  return out;
}

ClinicalMetadata anonymize(const ClinicalMetadata& m, const AnonymizationPolicy& policy) {
  return Anonymizer(policy, UidContext::random()).apply(m);
}

}  // namespace dicoderma
