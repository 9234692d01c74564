#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "dicoderma/uid.hpp"

namespace httplib {
class Server;
}

namespace dicoderma {

struct ServiceOptions {
  std::filesystem::path root;
  /// Static UI bundle served at "/"; a placeholder page is served when empty.
  std::filesystem::path ui_dir;
  std::string uid_root{kDefaultUidRoot};
  std::optional<std::uint64_t> seed;
};

/// JSON-over-HTTP API under /api for one served image directory.
///
///   GET  /api/health
///   GET  /api/images?dir=<relative dir>
///   GET  /api/images/{id}
///   GET  /api/images/{id}/bytes          ETag / If-None-Match
///   GET  /api/images/{id}/tags
///   PUT  /api/images/{id}/tags           If-Match precondition
///   POST /api/search
///   GET  /api/images/{id}/convert        query: allow_untagged
///   POST /api/images/{id}/convert        body: {allow_untagged, save, output}
///
/// Error bodies are {"error": code, "message": text, "issues": [...]?}.
class TaggerService {
 public:
  /// Throws Error{RootNotFound} if the root is not a directory.
  explicit TaggerService(ServiceOptions options);

  void mount(httplib::Server& server);

  /// Opaque token for a root-relative path (unpadded base64url).
  static std::string make_id(const std::filesystem::path& relative);

  /// Regular, non-symlink JPEG under the root for `id`, if any.
  std::optional<std::filesystem::path> resolve_id(std::string_view id) const;

  /// Directory under the root for a relative path ("" is the root itself).
  std::optional<std::filesystem::path> resolve_dir(std::string_view relative) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  nlohmann::json summarize(const std::filesystem::path& file) const;
  std::mutex& file_lock(const std::filesystem::path& file);

  ServiceOptions options_;
  std::filesystem::path root_;
  UidContext uids_;
  std::mutex locks_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

/// Binds `host:port` and serves until the process stops. Returns false if the
/// address cannot be bound.
bool run_service(TaggerService& service, const std::string& host, int port);

}  // namespace dicoderma
