#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dicoderma/jpeg.hpp"
#include "dicoderma/metadata.hpp"

namespace dicoderma {

enum class MatchKind { Equals, Contains, DateRange };

struct Predicate {
  Field field = Field::StudyDescription;
  MatchKind kind = MatchKind::Equals;
  std::string value;
  /// Inclusive YYYYMMDD bounds for DateRange; either may be open.
  std::optional<std::string> from;
  std::optional<std::string> to;

  static Predicate equals(Field field, std::string value);
  static Predicate contains(Field field, std::string value);
  /// Accepts YYYYMMDD or YYYY-MM-DD. Throws std::invalid_argument otherwise.
  static Predicate date_range(std::optional<std::string> from, std::optional<std::string> to);
};

struct SearchQuery {
  std::vector<Predicate> predicates;
  bool case_sensitive = false;
};

/// Throws std::invalid_argument if a date range targets a field other than
/// StudyDate.
void check_query(const SearchQuery& q);

/// Conjunction of all predicates; a predicate on an absent field fails.
bool match(const ClinicalMetadata& m, const SearchQuery& q);

struct TagRecord {
  std::filesystem::path path;
  ClinicalMetadata metadata;
  ImageDescriptor descriptor;
};

struct ScanDiagnostics {
  std::size_t files_considered = 0;
  std::size_t tagged = 0;
  std::size_t untagged = 0;
  std::size_t unparseable = 0;
  std::size_t unreadable = 0;
  /// (path, reason) for every file that could not be read or decoded.
  std::vector<std::pair<std::filesystem::path, std::string>> problems;
};

struct ScanResult {
  std::vector<TagRecord> records;
  ScanDiagnostics diagnostics;
};

bool has_jpeg_extension(const std::filesystem::path& path);

/// Recursively scans `root` (symlinks are not followed) for tagged JPEGs that
/// match `q`. Records are sorted by path. Throws Error{RootNotFound |
/// PermissionDenied} for problems with `root` itself.
ScanResult scan(const std::filesystem::path& root, const SearchQuery& q, unsigned threads = 0);

/// Normalizes YYYY-MM-DD or YYYYMMDD to YYYYMMDD.
std::optional<std::string> normalize_date(std::string_view text);

}  // namespace dicoderma
