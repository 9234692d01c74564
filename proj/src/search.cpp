#include "dicoderma/search.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dicoderma/error.hpp"
#include "dicoderma/file_io.hpp"

namespace dicoderma {
namespace fs = std::filesystem;

namespace {

std::string fold(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool match_one(const ClinicalMetadata& m, const Predicate& p, bool case_sensitive) {
  const auto value = get_field(m, p.field);
  if (!value) return false;
  switch (p.kind) {
    case MatchKind::Equals:
      return case_sensitive ? *value == p.value : fold(*value) == fold(p.value);
    case MatchKind::Contains:
      return case_sensitive ? value->find(p.value) != std::string::npos
                            : fold(*value).find(fold(p.value)) != std::string::npos;
    case MatchKind::DateRange:
      return (!p.from || *value >= *p.from) && (!p.to || *value <= *p.to);
  }
  return false;
}

}  // namespace

std::optional<std::string> normalize_date(std::string_view text) {
  std::string digits;
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    digits = std::string(text.substr(0, 4)) + std::string(text.substr(5, 2)) + std::string(text.substr(8, 2));
  } else {
    digits = std::string(text);
  }
  if (!is_valid_da(digits)) return std::nullopt;
  return digits;
}

Predicate Predicate::equals(Field field, std::string value) {
  return {field, MatchKind::Equals, std::move(value), std::nullopt, std::nullopt};
}

Predicate Predicate::contains(Field field, std::string value) {
  return {field, MatchKind::Contains, std::move(value), std::nullopt, std::nullopt};
}

Predicate Predicate::date_range(std::optional<std::string> from, std::optional<std::string> to) {
  Predicate p{Field::StudyDate, MatchKind::DateRange, {}, std::nullopt, std::nullopt};
  if (from) {
    p.from = normalize_date(*from);
    if (!p.from) throw std::invalid_argument("invalid date: " + *from);
  }
  if (to) {
    p.to = normalize_date(*to);
    if (!p.to) throw std::invalid_argument("invalid date: " + *to);
  }
  return p;
}

void check_query(const SearchQuery& q) {
  for (const auto& p : q.predicates) {
    if (p.kind == MatchKind::DateRange && p.field != Field::StudyDate) {
      throw std::invalid_argument("date ranges apply to StudyDate only");
    }
  }
}

bool match(const ClinicalMetadata& m, const SearchQuery& q) {
  return std::all_of(q.predicates.begin(), q.predicates.end(),
                     [&](const Predicate& p) { return match_one(m, p, q.case_sensitive); });
}

bool has_jpeg_extension(const fs::path& path) {
  const std::string ext = fold(path.extension().string());
  return ext == ".jpg" || ext == ".jpeg";
}

ScanResult scan(const fs::path& root, const SearchQuery& q, unsigned threads) {
  check_query(q);
  std::error_code ec;
  const auto status = fs::symlink_status(root, ec);
  if (ec || !fs::is_directory(status)) {
    if (ec.value() == EACCES) throw Error(ErrorCode::PermissionDenied, "cannot access " + root.string());
    throw Error(ErrorCode::RootNotFound, "search root not found: " + root.string());
  }

  ScanResult result;
  auto& diag = result.diagnostics;
  std::vector<fs::path> candidates;

  fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
  if (ec) {
    throw Error(ec.value() == EACCES ? ErrorCode::PermissionDenied : ErrorCode::RootNotFound,
                "cannot open " + root.string() + ": " + ec.message());
  }
  for (const fs::recursive_directory_iterator end; it != end; it.increment(ec)) {
    if (ec) {
      diag.problems.emplace_back(it->path(), ec.message());
      ec.clear();
      continue;
    }
    const auto entry_status = it->symlink_status(ec);
    if (ec || fs::is_symlink(entry_status) || !fs::is_regular_file(entry_status)) continue;
    if (has_jpeg_extension(it->path())) candidates.push_back(it->path());
  }
  diag.files_considered = candidates.size();

  struct Outcome {
    enum { Matched, NotMatched, Untagged, Unparseable, Unreadable } kind;
    TagRecord record;
    std::string reason;
  };
  std::vector<Outcome> outcomes(candidates.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < candidates.size(); i = next++) {
      Outcome& out = outcomes[i];
      try {
        const JpegDocument doc = read_jpeg_headers(candidates[i]);
        const auto comment = read_user_comment(doc);
        if (!detect(comment)) {
          out.kind = Outcome::Untagged;
          continue;
        }
        out.record = {candidates[i], decode_metadata(*comment), doc.frame};
        out.kind = match(out.record.metadata, q) ? Outcome::Matched : Outcome::NotMatched;
      } catch (const Error& e) {
        const bool io = e.code() == ErrorCode::IoError || e.code() == ErrorCode::PermissionDenied;
        out.kind = io ? Outcome::Unreadable : Outcome::Unparseable;
        out.reason = std::string(to_string(e.code())) + ": " + e.what();
      } catch (const std::exception& e) {
        out.kind = Outcome::Unparseable;
        out.reason = e.what();
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, candidates.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    auto& out = outcomes[i];
    switch (out.kind) {
      case Outcome::Matched:
        ++diag.tagged;
        result.records.push_back(std::move(out.record));
        break;
      case Outcome::NotMatched:
        ++diag.tagged;
        break;
      case Outcome::Untagged:
        ++diag.untagged;
        break;
      case Outcome::Unparseable:
        ++diag.unparseable;
        diag.problems.emplace_back(candidates[i], out.reason);
        break;
      case Outcome::Unreadable:
        ++diag.unreadable;
        diag.problems.emplace_back(candidates[i], out.reason);
        break;
    }
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const TagRecord& a, const TagRecord& b) {
              return a.path.generic_string() < b.path.generic_string();
            });
  std::sort(diag.problems.begin(), diag.problems.end());
  return result;
}

}  // namespace dicoderma
