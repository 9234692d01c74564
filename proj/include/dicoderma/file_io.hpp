#pragma once

#include <filesystem>

#include "dicoderma/bytes.hpp"
#include "dicoderma/jpeg.hpp"

namespace dicoderma {

/// Throws Error{IoError | PermissionDenied}.
Bytes read_file(const std::filesystem::path& path);

/// Reads only as much of the file as needed to reach the first SOS marker.
JpegDocument read_jpeg_headers(const std::filesystem::path& path);

/// Writes to a temporary file in the target directory, then renames it over
/// `path`.
void write_file_atomic(const std::filesystem::path& path, ByteView bytes);

}  // namespace dicoderma
