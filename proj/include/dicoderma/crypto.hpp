#pragma once

#include <string>

#include "dicoderma/bytes.hpp"

namespace dicoderma {

/// Lowercase hex HMAC-SHA256 of `message` under `key`.
std::string hmac_sha256_hex(ByteView key, ByteView message);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(ByteView data);

}  // namespace dicoderma
