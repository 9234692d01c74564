#include "dicoderma/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dicoderma/anonymize.hpp"
#include "dicoderma/dicom.hpp"
#include "dicoderma/error.hpp"
#include "dicoderma/file_io.hpp"
#include "dicoderma/jpeg.hpp"
#include "dicoderma/metadata.hpp"
#include "dicoderma/search.hpp"
#include "dicoderma/service.hpp"

namespace dicoderma::cli {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OperationalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<Field, std::string> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw UsageError("expected FIELD=VALUE, got '" + text + "'");
  const std::string name = text.substr(0, eq);
  const auto field = field_from_name(name);
  if (!field) throw UsageError("unknown field '" + name + "'");
  return {*field, text.substr(eq + 1)};
}

fs::path sibling(const fs::path& file, std::string_view suffix, std::string_view extension = {}) {
  fs::path out = file;
  out.replace_filename(file.stem().string() + std::string(suffix) +
                       (extension.empty() ? file.extension().string() : std::string(extension)));
  return out;
}

void print_issues(std::ostream& err, const InvalidMetadataError& e) {
  for (const auto& i : e.issues()) err << "  " << i.field << ": " << i.message << " [" << i.rule << "]\n";
}

/// Loads a JPEG and its decoded metadata. Untagged files yield nullopt.
struct TaggedFile {
  Bytes bytes;
  JpegDocument doc;
  std::optional<std::string> comment;
  std::optional<ClinicalMetadata> metadata;
};

TaggedFile load(const fs::path& path) {
  TaggedFile f;
  f.bytes = read_file(path);
  f.doc = parse_jpeg(f.bytes);
  f.comment = read_user_comment(f.doc);
  if (detect(f.comment)) f.metadata = decode_metadata(*f.comment);
  return f;
}

UidContext make_uid_context(const std::string& root, const std::optional<std::uint64_t>& seed) {
  if (!is_valid_uid(root)) throw UsageError("--uid-root must be a dotted-decimal UID");
  return seed ? UidContext::seeded(*seed, root) : UidContext::random(root);
}

bool is_loopback(const std::string& host) {
  return host == "127.0.0.1" || host == "::1" || host == "localhost" || host.starts_with("127.");
}

std::string trim_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

// ---------------------------------------------------------------------------

struct TagOptions {
  std::string file;
  std::vector<std::string> fields;
  std::string date_time;
  std::string output;
  bool in_place = false;
};

int cmd_tag(const TagOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<std::pair<Field, std::string>> updates;
  for (const auto& f : o.fields) updates.push_back(parse_assignment(f));
  if (o.in_place && !o.output.empty()) throw UsageError("--in-place and --output are exclusive");

  TaggedFile f = load(o.file);
  ClinicalMetadata m = f.metadata.value_or(ClinicalMetadata{});
  for (auto& [field, value] : updates) {
    set_field(m, field, value.empty() ? std::nullopt : std::optional<std::string>(value));
  }
  if (!o.date_time.empty()) {
    std::string da, tm;
    if (!split_iso_datetime(o.date_time, da, tm)) throw UsageError("--date-time is not ISO-8601: " + o.date_time);
    m.study_date = da;
    m.study_time = tm.empty() ? std::nullopt : std::optional<std::string>(tm);
  }

  std::string payload;
  try {
    payload = encode_metadata(m);
  } catch (const InvalidMetadataError& e) {
    err << "error: invalid metadata\n";
    print_issues(err, e);
    return kExitError;
  }
  const Bytes updated = write_user_comment(f.doc, payload);
  const fs::path target = o.in_place ? fs::path(o.file)
                          : !o.output.empty() ? fs::path(o.output)
                                              : sibling(o.file, ".tagged");
  write_file_atomic(target, updated);
  out << target.string() << "\n";
  return kExitOk;
}

int cmd_show(const std::string& file, const std::string& format, std::ostream& out, std::ostream& err) {
  const Bytes bytes = read_file(file);
  const auto comment = read_user_comment(parse_jpeg(bytes));
  if (!detect(comment)) {
    err << file << ": untagged\n";
    return kExitError;
  }
  const ClinicalMetadata m = decode_metadata(*comment);
  if (format == "json") {
    out << *comment << "\n";
    return kExitOk;
  }
  out << std::left << std::setw(20) << "dicoderma" << m.schema_version << "\n";
  for (Field f : kAllFields) {
    if (f == Field::Deidentified) {
      if (m.deidentified) out << std::setw(20) << keyword(f) << "true\n";
      continue;
    }
    if (auto v = get_field(m, f)) out << std::setw(20) << keyword(f) << *v << "\n";
  }
  for (const auto& [key, value] : m.extras.items()) {
    out << std::setw(20) << key << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
  }
  return kExitOk;
}

struct SearchOptions {
  std::string root;
  std::vector<std::string> where;
  std::vector<std::string> contains;
  std::string from;
  std::string to;
  bool case_sensitive = false;
  bool json_output = false;
};

int cmd_search(const SearchOptions& o, std::ostream& out, std::ostream& err) {
  SearchQuery q;
  q.case_sensitive = o.case_sensitive;
  for (const auto& w : o.where) {
    auto [field, value] = parse_assignment(w);
    q.predicates.push_back(Predicate::equals(field, value));
  }
  for (const auto& c : o.contains) {
    auto [field, value] = parse_assignment(c);
    q.predicates.push_back(Predicate::contains(field, value));
  }
  if (!o.from.empty() || !o.to.empty()) {
    try {
      q.predicates.push_back(Predicate::date_range(o.from.empty() ? std::nullopt : std::optional(o.from),
                                                   o.to.empty() ? std::nullopt : std::optional(o.to)));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const ScanResult result = scan(o.root, q);
  if (o.json_output) {
    json records = json::array();
    for (const auto& r : result.records) {
      records.push_back({{"path", r.path.generic_string()},
                         {"metadata", json::parse(encode_metadata(r.metadata))},
                         {"rows", r.descriptor.rows},
                         {"columns", r.descriptor.columns}});
    }
    out << records.dump() << "\n";
  } else {
    for (const auto& r : result.records) out << r.path.generic_string() << "\n";
  }
  const auto& d = result.diagnostics;
  if (d.unparseable + d.unreadable > 0) {
    err << "skipped " << d.unparseable << " unparseable and " << d.unreadable << " unreadable file(s)\n";
  }
  return kExitOk;
}

struct ConvertOptions {
  std::string file;
  std::string output;
  std::string uid_root{kDefaultUidRoot};
  std::optional<std::uint64_t> seed;
  bool allow_untagged = false;
  bool json_output = false;
};

int cmd_convert(const ConvertOptions& o, std::ostream& out, std::ostream& err) {
  UidContext ctx = make_uid_context(o.uid_root, o.seed);
  const TaggedFile f = load(o.file);
  if (!f.metadata && !o.allow_untagged) {
    err << o.file << ": untagged (use --allow-untagged to convert without demographics)\n";
    return kExitError;
  }
  const auto conversion = dicom::convert_jpeg(f.bytes, f.metadata.value_or(ClinicalMetadata{}), ctx);
  const fs::path target = o.output.empty() ? sibling(o.file, "", ".dcm") : fs::path(o.output);
  write_file_atomic(target, conversion.file);
  if (o.json_output) {
    out << json{{"output", target.generic_string()}, {"sop_instance_uid", conversion.sop_instance_uid}}.dump()
        << "\n";
  } else {
    out << conversion.sop_instance_uid << "\n";
  }
  return kExitOk;
}

struct AnonymizeOptions {
  std::vector<std::string> files;
  std::string output;
  bool in_place = false;
  bool keep_name = false;
  bool no_pseudonymize = false;
  std::string dates = "keep";
  std::string secret_file;
  std::string uid_root{kDefaultUidRoot};
  std::optional<std::uint64_t> seed;
};

int cmd_anonymize(const AnonymizeOptions& o, std::ostream& out, std::ostream& err) {
  if (!o.output.empty() && (o.files.size() != 1 || o.in_place)) {
    throw UsageError("--output needs exactly one input file and no --in-place");
  }
  AnonymizationPolicy policy;
  policy.drop_name = !o.keep_name;
  policy.pseudonymize_id = !o.no_pseudonymize;
  policy.date_handling = o.dates == "year-only" ? DateHandling::YearOnly
                         : o.dates == "drop"    ? DateHandling::Drop
                                                : DateHandling::Keep;
  if (!o.secret_file.empty()) {
    const Bytes secret = read_file(o.secret_file);
    policy.secret = trim_newlines(std::string(secret.begin(), secret.end()));
  } else if (const char* env = std::getenv(kSecretEnv)) {
    policy.secret = env;
  }
  Anonymizer anonymizer(std::move(policy), make_uid_context(o.uid_root, o.seed));

  int status = kExitOk;
  for (const auto& file : o.files) {
    try {
      const TaggedFile f = load(file);
      if (!f.metadata) {
        err << file << ": untagged\n";
        status = kExitError;
        continue;
      }
      const ClinicalMetadata anon = anonymizer.apply(*f.metadata);
      const fs::path target = o.in_place ? fs::path(file)
                              : !o.output.empty() ? fs::path(o.output)
                                                  : sibling(file, ".anon");
      if (anon == *f.metadata && o.in_place) {
        out << file << ": already de-identified, unchanged\n";
        continue;
      }
      write_file_atomic(target, write_user_comment(f.doc, encode_metadata(anon)));
      out << target.string() << "\n";
    } catch (const Error& e) {
      err << file << ": " << to_string(e.code()) << ": " << e.what() << "\n";
      status = kExitError;
    }
  }
  return status;
}

int cmd_detect(const std::vector<std::string>& paths, bool json_output, std::ostream& out) {
  bool any_tagged = false;
  bool any_unreadable = false;
  json verdicts = json::array();
  for (const auto& path : paths) {
    std::string verdict;
    try {
      const Bytes bytes = read_file(path);
      verdict = detect(read_user_comment(parse_jpeg(bytes))) ? "TAGGED" : "CLEAN";
    } catch (const Error& e) {
      // Formats other than JPEG cannot carry the payload.
      verdict = e.code() == ErrorCode::NotAJpeg ? "CLEAN" : "UNREADABLE";
    }
    any_tagged |= verdict == "TAGGED";
    any_unreadable |= verdict == "UNREADABLE";
    if (json_output) {
      verdicts.push_back({{"path", path}, {"verdict", verdict}});
    } else {
      out << path << "\t" << verdict << "\n";
    }
  }
  if (json_output) out << verdicts.dump() << "\n";
  if (any_unreadable) return kExitError;
  return any_tagged ? kExitTagged : kExitOk;
}

struct ServeOptions {
  std::string root;
  std::string bind = "127.0.0.1";
  int port = 8080;
  bool allow_remote = false;
  std::string ui_dir;
  std::string uid_root{kDefaultUidRoot};
  std::optional<std::uint64_t> seed;
};

int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
  if (!is_loopback(o.bind) && !o.allow_remote) {
    throw UsageError("binding to " + o.bind + " exposes patient data; pass --allow-remote to confirm");
  }
  if (!is_valid_uid(o.uid_root)) throw UsageError("--uid-root must be a dotted-decimal UID");
  TaggerService service({o.root, o.ui_dir, o.uid_root, o.seed});
  out << "serving " << service.root().string() << " on http://" << o.bind << ":" << o.port << "/" << std::endl;
  if (!run_service(service, o.bind, o.port)) {
    err << "error: cannot bind " << o.bind << ":" << o.port << " (port in use?)\n";
    return kExitError;
  }
  return kExitOk;
}

}  // namespace

bool split_iso_datetime(const std::string& text, std::string& da, std::string& tm) {
  const auto sep = text.find_first_of("T ");
  const std::string date = text.substr(0, sep);
  const auto normalized = normalize_date(date);
  if (!normalized) return false;
  da = *normalized;
  tm.clear();
  if (sep == std::string::npos) return true;

  std::string time = text.substr(sep + 1);
  if (const auto zone = time.find_first_of("Z+-"); zone != std::string::npos) time.resize(zone);
  if (const auto dot = time.find('.'); dot != std::string::npos) time.resize(dot);
  std::string digits;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (time[i] == ':') {
      if (i != 2 && i != 5) return false;
      continue;
    }
    if (time[i] < '0' || time[i] > '9') return false;
    digits += time[i];
  }
  if (digits.size() != 4 && digits.size() != 6) return false;
  if (digits.size() == 4) digits += "00";
  ClinicalMetadata probe;
  probe.study_time = digits;
  if (!validate(probe).empty()) return false;
  tm = digits;
  return true;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embed clinical tags in JPEG EXIF and convert tagged images to DICOM", "dicoderma"};
  app.require_subcommand(1);

  TagOptions tag;
  auto* tag_cmd = app.add_subcommand("tag", "Write clinical tags into an image's EXIF UserComment");
  tag_cmd->add_option("file", tag.file, "JPEG image")->required();
  tag_cmd->add_option("fields", tag.fields, "FIELD=VALUE pairs (DICOM keyword or snake_case name)");
  tag_cmd->add_option("--date-time", tag.date_time, "ISO-8601 date-time, stored as StudyDate/StudyTime");
  tag_cmd->add_option("-o,--output", tag.output, "Output path (default <name>.tagged.jpg)");
  tag_cmd->add_flag("--in-place", tag.in_place, "Rewrite the input file");

  std::string show_file, show_format = "text";
  auto* show_cmd = app.add_subcommand("show", "Print the tags stored in an image");
  show_cmd->add_option("file", show_file)->required();
  show_cmd->add_option("--format", show_format)->check(CLI::IsMember({"text", "json"}));

  SearchOptions search;
  auto* search_cmd = app.add_subcommand("search", "Find tagged images under a folder, including subfolders");
  search_cmd->add_option("root", search.root)->required();
  search_cmd->add_option("--where", search.where, "FIELD=VALUE exact match");
  search_cmd->add_option("--contains", search.contains, "FIELD=TEXT substring match");
  search_cmd->add_option("--from", search.from, "Earliest StudyDate (YYYYMMDD or YYYY-MM-DD)");
  search_cmd->add_option("--to", search.to, "Latest StudyDate");
  search_cmd->add_flag("--case-sensitive", search.case_sensitive);
  search_cmd->add_flag("--json", search.json_output);

  ConvertOptions convert;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a tagged baseline JPEG to a DICOM SC file");
  convert_cmd->add_option("file", convert.file)->required();
  convert_cmd->add_option("-o,--output", convert.output, "Output path (default <name>.dcm)");
  convert_cmd->add_option("--uid-root", convert.uid_root);
  convert_cmd->add_option("--seed", convert.seed, "Deterministic UIDs (testing only)");
  convert_cmd->add_flag("--allow-untagged", convert.allow_untagged);
  convert_cmd->add_flag("--json", convert.json_output);

  AnonymizeOptions anon;
  auto* anon_cmd = app.add_subcommand("anonymize", "De-identify the tags of one or more images");
  anon_cmd->add_option("files", anon.files)->required();
  anon_cmd->add_option("-o,--output", anon.output, "Output path for a single input (default <name>.anon.jpg)");
  anon_cmd->add_flag("--in-place", anon.in_place);
  anon_cmd->add_flag("--keep-name", anon.keep_name);
  anon_cmd->add_flag("--no-pseudonymize", anon.no_pseudonymize);
  anon_cmd->add_option("--dates", anon.dates)->check(CLI::IsMember({"keep", "year-only", "drop"}));
  anon_cmd->add_option("--secret-file", anon.secret_file, std::string("Pseudonym key (else $") + kSecretEnv + ")");
  anon_cmd->add_option("--uid-root", anon.uid_root);
  anon_cmd->add_option("--seed", anon.seed, "Deterministic UIDs (testing only)");

  std::vector<std::string> detect_paths;
  bool detect_json = false;
  auto* detect_cmd = app.add_subcommand("detect", "Report which files carry dicoderma tags (exit 3 if any)");
  detect_cmd->add_option("paths", detect_paths)->required();
  detect_cmd->add_flag("--json", detect_json);

  ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the tagging API and UI for a folder");
  serve_cmd->add_option("root", serve.root)->required();
  serve_cmd->add_option("--bind", serve.bind);
  serve_cmd->add_option("--port", serve.port);
  serve_cmd->add_flag("--allow-remote", serve.allow_remote);
  serve_cmd->add_option("--ui-dir", serve.ui_dir, "Directory holding the built UI bundle");
  serve_cmd->add_option("--uid-root", serve.uid_root);
  serve_cmd->add_option("--seed", serve.seed, "Deterministic UIDs (testing only)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*tag_cmd) return cmd_tag(tag, out, err);
    if (*show_cmd) return cmd_show(show_file, show_format, out, err);
    if (*search_cmd) return cmd_search(search, out, err);
    if (*convert_cmd) return cmd_convert(convert, out, err);
    if (*anon_cmd) return cmd_anonymize(anon, out, err);
    if (*detect_cmd) return cmd_detect(detect_paths, detect_json, out);
    if (*serve_cmd) return cmd_serve(serve, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidMetadataError& e) {
    err << "error: " << to_string(e.code()) << "\n";
    print_issues(err, e);
    return kExitError;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace dicoderma::cli
