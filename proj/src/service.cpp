#include "dicoderma/service.hpp"

#include <algorithm>
#include <httplib.h>

#include "dicoderma/crypto.hpp"
#include "dicoderma/dicom.hpp"
#include "dicoderma/error.hpp"
#include "dicoderma/file_io.hpp"
#include "dicoderma/jpeg.hpp"
#include "dicoderma/metadata.hpp"
#include "dicoderma/search.hpp"

namespace dicoderma {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kBase64Url[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

std::string base64url_encode(std::string_view in) {
  std::string out;
  std::uint32_t buffer = 0;
  int bits = 0;
  for (unsigned char c : in) {
    buffer = (buffer << 8) | c;
    bits += 8;
    while (bits >= 6) {
      bits -= 6;
      out += kBase64Url[(buffer >> bits) & 0x3F];
    }
  }
  if (bits > 0) out += kBase64Url[(buffer << (6 - bits)) & 0x3F];
  return out;
}

std::optional<std::string> base64url_decode(std::string_view in) {
  std::string out;
  std::uint32_t buffer = 0;
  int bits = 0;
  for (char c : in) {
    const char* pos = std::strchr(kBase64Url, c);
    if (c == '\0' || !pos) return std::nullopt;
    buffer = (buffer << 6) | static_cast<std::uint32_t>(pos - kBase64Url);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((buffer >> bits) & 0xFF);
    }
  }
  return out;
}

/// Accepts only plain relative paths: no root, no "." or ".." components.
std::optional<fs::path> safe_relative(std::string_view text) {
  if (text.find('\0') != std::string_view::npos || text.find('\\') != std::string_view::npos) {
    return std::nullopt;
  }
  const fs::path rel(text);
  if (rel.is_absolute() || rel.has_root_name() || rel.has_root_directory()) return std::nullopt;
  for (const auto& part : rel) {
    if (part == ".." || part == ".") return std::nullopt;
  }
  return rel;
}

/// True when no component between root and `path` is a symlink.
bool contained(const fs::path& root, const fs::path& rel) {
  fs::path cursor = root;
  std::error_code ec;
  for (const auto& part : rel) {
    if (part.empty()) continue;
    cursor /= part;
    const auto st = fs::symlink_status(cursor, ec);
    if (ec || fs::is_symlink(st)) return false;
  }
  return true;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::vector<ValidationIssue>* issues = nullptr) {
  json body{{"error", code}, {"message", message}};
  if (issues) {
    json list = json::array();
    for (const auto& i : *issues) list.push_back({{"field", i.field}, {"rule", i.rule}, {"message", i.message}});
    body["issues"] = list;
  }
  send_json(res, status, body);
}

std::string quoted(const std::string& etag) { return "\"" + etag + "\""; }

std::string unquote(std::string s) {
  if (s.starts_with("W/")) s = s.substr(2);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

json metadata_object(const ClinicalMetadata& m) { return json::parse(encode_metadata(m)); }

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotAJpeg:
    case ErrorCode::TruncatedFile:
    case ErrorCode::MissingFrameHeader:
    case ErrorCode::UnsupportedFrame:
    case ErrorCode::MalformedExif:
    case ErrorCode::NotBaselineJpeg:
      return 415;
    case ErrorCode::MalformedJson:
      return 400;
    case ErrorCode::NotDicoderma:
    case ErrorCode::InvalidMetadata:
    case ErrorCode::OversizeExif:
      return 422;
    case ErrorCode::RootNotFound:
      return 404;
    case ErrorCode::PermissionDenied:
      return 403;
    default:
      return 500;
  }
}

void send_exception(httplib::Response& res, const Error& e) {
  if (const auto* invalid = dynamic_cast<const InvalidMetadataError*>(&e)) {
    send_error(res, 422, to_string(e.code()), e.what(), &invalid->issues());
  } else {
    send_error(res, status_for(e.code()), to_string(e.code()), e.what());
  }
}

SearchQuery query_from_json(const json& body) {
  SearchQuery q;
  if (!body.is_object()) throw std::invalid_argument("search body must be a JSON object");
  q.case_sensitive = body.value("case_sensitive", false);
  for (const auto& p : body.value("predicates", json::array())) {
    const std::string kind = p.value("match", p.value("op", std::string("equals")));
    if (kind == "date_range") {
      std::optional<std::string> from, to;
      if (p.contains("from") && !p["from"].is_null()) from = p["from"].get<std::string>();
      if (p.contains("to") && !p["to"].is_null()) to = p["to"].get<std::string>();
      const std::string field = p.value("field", std::string("StudyDate"));
      if (field_from_name(field) != Field::StudyDate) {
        throw std::invalid_argument("date_range applies to StudyDate only");
      }
      q.predicates.push_back(Predicate::date_range(from, to));
      continue;
    }
    const std::string name = p.at("field").get<std::string>();
    const auto field = field_from_name(name);
    if (!field) throw std::invalid_argument("unknown field: " + name);
    const std::string value = p.at("value").get<std::string>();
    if (kind == "equals") {
      q.predicates.push_back(Predicate::equals(*field, value));
    } else if (kind == "contains") {
      q.predicates.push_back(Predicate::contains(*field, value));
    } else {
      throw std::invalid_argument("unknown match kind: " + kind);
    }
  }
  return q;
}

}  // namespace

TaggerService::TaggerService(ServiceOptions options) : options_(std::move(options)) {
  std::error_code ec;
  if (!fs::is_directory(options_.root, ec)) {
    throw Error(ErrorCode::RootNotFound, "served root is not a directory: " + options_.root.string());
  }
  root_ = fs::canonical(options_.root);
  uids_ = options_.seed ? UidContext::seeded(*options_.seed, options_.uid_root)
                        : UidContext::random(options_.uid_root);
}

std::string TaggerService::make_id(const fs::path& relative) {
  return base64url_encode(relative.generic_string());
}

std::optional<fs::path> TaggerService::resolve_id(std::string_view id) const {
  const auto decoded = base64url_decode(id);
  if (!decoded || decoded->empty()) return std::nullopt;
  const auto rel = safe_relative(*decoded);
  if (!rel || !has_jpeg_extension(*rel) || !contained(root_, *rel)) return std::nullopt;
  const fs::path full = root_ / *rel;
  std::error_code ec;
  if (!fs::is_regular_file(fs::symlink_status(full, ec))) return std::nullopt;
  return full;
}

std::optional<fs::path> TaggerService::resolve_dir(std::string_view relative) const {
  if (relative.empty() || relative == "/" || relative == ".") return root_;
  const auto rel = safe_relative(relative);
  if (!rel || !contained(root_, *rel)) return std::nullopt;
  const fs::path full = root_ / *rel;
  std::error_code ec;
  if (!fs::is_directory(fs::symlink_status(full, ec))) return std::nullopt;
  return full;
}

std::mutex& TaggerService::file_lock(const fs::path& file) {
  std::lock_guard guard(locks_guard_);
  auto& slot = locks_[file.string()];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

json TaggerService::summarize(const fs::path& file) const {
  const fs::path rel = file.lexically_relative(root_);
  json out{{"id", make_id(rel)},
           {"relative_path", rel.generic_string()},
           {"tagged", false},
           {"metadata", nullptr},
           {"rows", 0},
           {"columns", 0}};
  try {
    const JpegDocument doc = read_jpeg_headers(file);
    out["rows"] = doc.frame.rows;
    out["columns"] = doc.frame.columns;
    out["components"] = doc.frame.components;
    out["baseline"] = doc.frame.baseline;
    const auto comment = read_user_comment(doc);
    if (detect(comment)) {
      out["tagged"] = true;
      try {
        out["metadata"] = metadata_object(decode_metadata(*comment));
      } catch (const Error& e) {
        out["error"] = to_string(e.code());
      }
    }
  } catch (const Error& e) {
    out["error"] = to_string(e.code());
  }
  return out;
}

void TaggerService::mount(httplib::Server& server) {
  server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server.Get("/api/images", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string rel = req.has_param("dir") ? req.get_param_value("dir") : "";
    const auto dir = resolve_dir(rel);
    if (!dir) return send_error(res, 404, "NotFound", "no such directory under the served root");
    std::vector<fs::path> files;
    std::vector<std::string> dirs;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(*dir, ec)) {
      const auto st = entry.symlink_status(ec);
      if (ec || fs::is_symlink(st)) continue;
      if (fs::is_directory(st)) {
        dirs.push_back(entry.path().filename().string());
      } else if (fs::is_regular_file(st) && has_jpeg_extension(entry.path())) {
        files.push_back(entry.path());
      }
    }
    std::sort(dirs.begin(), dirs.end());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
    json images = json::array();
    for (const auto& f : files) images.push_back(summarize(f));
    send_json(res, 200,
              {{"dir", dir->lexically_relative(root_).generic_string()}, {"directories", dirs}, {"images", images}});
  });

  server.Get("/api/images/:id", [this](const httplib::Request& req, httplib::Response& res) {
    const auto file = resolve_id(req.path_params.at("id"));
    if (!file) return send_error(res, 404, "NotFound", "unknown image id");
    send_json(res, 200, summarize(*file));
  });

  server.Get("/api/images/:id/bytes", [this](const httplib::Request& req, httplib::Response& res) {
    const auto file = resolve_id(req.path_params.at("id"));
    if (!file) return send_error(res, 404, "NotFound", "unknown image id");
    try {
      const Bytes data = read_file(*file);
      const std::string etag = sha256_hex(data);
      res.set_header("ETag", quoted(etag));
      res.set_header("Cache-Control", "no-cache");
      if (req.has_header("If-None-Match") && unquote(req.get_header_value("If-None-Match")) == etag) {
        res.status = 304;
        return;
      }
      res.status = 200;
      res.set_content(std::string(data.begin(), data.end()), "image/jpeg");
    } catch (const Error& e) {
      send_exception(res, e);
    }
  });

  server.Get("/api/images/:id/tags", [this](const httplib::Request& req, httplib::Response& res) {
    const auto file = resolve_id(req.path_params.at("id"));
    if (!file) return send_error(res, 404, "NotFound", "unknown image id");
    try {
      const Bytes data = read_file(*file);
      const auto comment = read_user_comment(parse_jpeg(data));
      json body{{"id", req.path_params.at("id")}, {"etag", sha256_hex(data)}, {"tagged", detect(comment)},
                {"metadata", nullptr}};
      if (detect(comment)) body["metadata"] = metadata_object(decode_metadata(*comment));
      res.set_header("ETag", quoted(body["etag"].get<std::string>()));
      send_json(res, 200, body);
    } catch (const Error& e) {
      send_exception(res, e);
    }
  });

  server.Put("/api/images/:id/tags", [this](const httplib::Request& req, httplib::Response& res) {
    const auto file = resolve_id(req.path_params.at("id"));
    if (!file) return send_error(res, 404, "NotFound", "unknown image id");
    try {
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) {
        return send_error(res, 400, "MalformedJson", "body must be a JSON object of metadata fields");
      }
      if (!body.contains(kMarkerKey)) body[std::string(kMarkerKey)] = kSchemaVersion;
      const ClinicalMetadata m = decode_metadata(body.dump());
      const std::string payload = encode_metadata(m);

      std::lock_guard lock(file_lock(*file));
      const Bytes current = read_file(*file);
      const std::string before = sha256_hex(current);
      if (req.has_header("If-Match") && unquote(req.get_header_value("If-Match")) != before) {
        return send_error(res, 409, "Conflict", "image changed since it was read; reload and retry");
      }
      const Bytes updated = write_user_comment(parse_jpeg(current), payload);
      if (updated != current) write_file_atomic(*file, updated);
      const std::string etag = sha256_hex(updated);
      res.set_header("ETag", quoted(etag));
      send_json(res, 200,
                {{"id", req.path_params.at("id")}, {"etag", etag}, {"tagged", true}, {"metadata", json::parse(payload)}});
    } catch (const Error& e) {
      send_exception(res, e);
    }
  });

  server.Post("/api/search", [this](const httplib::Request& req, httplib::Response& res) {
    SearchQuery q;
    try {
      const json body = req.body.empty() ? json::object() : json::parse(req.body);
      q = query_from_json(body);
    } catch (const std::exception& e) {
      return send_error(res, 400, "BadQuery", e.what());
    }
    try {
      const ScanResult result = scan(root_, q);
      json items = json::array();
      for (const auto& r : result.records) {
        json item = summarize(r.path);
        items.push_back(item);
      }
      const auto& d = result.diagnostics;
      send_json(res, 200,
                {{"results", items},
                 {"diagnostics",
                  {{"files_considered", d.files_considered}, {"tagged", d.tagged}, {"untagged", d.untagged},
                   {"unparseable", d.unparseable}, {"unreadable", d.unreadable}}}});
    } catch (const Error& e) {
      send_exception(res, e);
    }
  });

  auto convert = [this](const httplib::Request& req, httplib::Response& res) {
    const auto file = resolve_id(req.path_params.at("id"));
    if (!file) return send_error(res, 404, "NotFound", "unknown image id");
    json options = json::object();
    if (req.method == "POST" && !req.body.empty()) {
      options = json::parse(req.body, nullptr, false);
      if (options.is_discarded() || !options.is_object()) {
        return send_error(res, 400, "MalformedJson", "options must be a JSON object");
      }
    }
    const bool allow_untagged =
        options.value("allow_untagged", false) ||
        (req.has_param("allow_untagged") && req.get_param_value("allow_untagged") != "0");
    try {
      const Bytes data = read_file(*file);
      const JpegDocument doc = parse_jpeg(data);
      const auto comment = read_user_comment(doc);
      ClinicalMetadata m;
      if (detect(comment)) {
        m = decode_metadata(*comment);
      } else if (!allow_untagged) {
        return send_error(res, 422, "Untagged", "image carries no dicoderma tags");
      }
      if (!doc.frame.baseline) {
        return send_error(res, 415, "NotBaselineJpeg", "only baseline JPEG can be converted");
      }
      const auto conversion = dicom::convert_jpeg(data, m, uids_);
      if (options.value("save", false)) {
        const auto rel = safe_relative(options.value("output", std::string()));
        if (!rel || rel->empty() || rel->extension() != ".dcm" || !contained(root_, rel->parent_path()) ||
            !fs::is_directory(root_ / rel->parent_path())) {
          return send_error(res, 400, "BadOutput", "output must be a relative .dcm path inside the root");
        }
        const fs::path target = root_ / *rel;
        std::error_code ec;
        if (fs::is_symlink(fs::symlink_status(target, ec))) {
          return send_error(res, 400, "BadOutput", "output path is a symlink");
        }
        write_file_atomic(target, conversion.file);
      }
      res.status = 200;
      res.set_header("Content-Disposition",
                     "attachment; filename=\"" + file->stem().string() + ".dcm\"");
      res.set_header("X-SOP-Instance-UID", conversion.sop_instance_uid);
      res.set_content(std::string(conversion.file.begin(), conversion.file.end()), "application/dicom");
    } catch (const Error& e) {
      send_exception(res, e);
    }
  };
  server.Get("/api/images/:id/convert", convert);
  server.Post("/api/images/:id/convert", convert);

  if (!options_.ui_dir.empty() && fs::is_directory(options_.ui_dir)) {
    server.set_mount_point("/", options_.ui_dir.string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(
          "<!doctype html><title>dicoderma</title><p>The tagging UI bundle is not installed. "
          "Start the service with --ui-dir to serve it. The API is available under /api.</p>",
          "text/html");
    });
  }
}

bool run_service(TaggerService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  return server.listen(host, port);
}

}  // namespace dicoderma
