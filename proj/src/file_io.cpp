#include "dicoderma/file_io.hpp"

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>

#include <unistd.h>

#include "dicoderma/error.hpp"

namespace dicoderma {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_failure(const fs::path& path, const char* action, int err) {
  const ErrorCode code = (err == EACCES || err == EPERM) ? ErrorCode::PermissionDenied : ErrorCode::IoError;
  throw Error(code, std::string("cannot ") + action + " " + path.string() + ": " + std::strerror(err));
}

}  // namespace

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_failure(path, "open", errno);
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) io_failure(path, "read", errno);
  return data;
}

JpegDocument read_jpeg_headers(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_failure(path, "open", errno);
  Bytes data;
  std::size_t chunk = 64 * 1024;
  while (true) {
    const std::size_t old = data.size();
    data.resize(old + chunk);
    in.read(reinterpret_cast<char*>(data.data() + old), static_cast<std::streamsize>(chunk));
    data.resize(old + static_cast<std::size_t>(in.gcount()));
    const bool at_end = !in;
    try {
      return parse_jpeg(data, ParseScope::HeadersOnly);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TruncatedFile || at_end) throw;
    }
    chunk *= 2;
  }
}

void write_file_atomic(const fs::path& path, ByteView bytes) {
  static std::atomic<unsigned> counter{0};
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp-" + std::to_string(::getpid()) +
                              "-" + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) io_failure(tmp, "create", errno);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      const int err = errno;
      std::error_code ignored;
      fs::remove(tmp, ignored);
      io_failure(tmp, "write", err);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    io_failure(path, "replace", ec.value());
  }
}

}  // namespace dicoderma
