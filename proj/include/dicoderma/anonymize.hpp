#pragma once

#include <map>
#include <string>

#include "dicoderma/metadata.hpp"
#include "dicoderma/uid.hpp"

namespace dicoderma {

enum class DateHandling { Keep, YearOnly, Drop };

struct AnonymizationPolicy {
  bool drop_name = true;
  bool pseudonymize_id = true;
  DateHandling date_handling = DateHandling::Keep;
  std::string secret;
};

/// First 16 hex characters of HMAC-SHA256(secret, patient_id).
std::string pseudonym(std::string_view secret, std::string_view patient_id);

/// Extra keys removed during anonymization because they name DICOM
/// attributes that identify the patient, provider or institution.
bool is_identifying_extra(std::string_view key);

/// Applies one policy to a batch of images. UID replacements are remembered
/// for the lifetime of the object so images that shared a study or series
/// keep sharing the replacement.
class Anonymizer {
 public:
  /// Throws Error{MissingSecret} when pseudonymization has no key.
  Anonymizer(AnonymizationPolicy policy, UidContext uids);

  /// Already de-identified input is returned unchanged.
  ClinicalMetadata apply(const ClinicalMetadata& m);

 private:
  std::string replace_uid(const std::string& original);

  AnonymizationPolicy policy_;
  UidContext uids_;
  std::map<std::string, std::string> uid_map_;
};

/// Single-image batch with a random UID source.
ClinicalMetadata anonymize(const ClinicalMetadata& m, const AnonymizationPolicy& policy);

}  // namespace dicoderma
