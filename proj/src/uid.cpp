#include "dicoderma/uid.hpp"

#include <algorithm>
#include <stdexcept>

#include "dicoderma/error.hpp"
#include "dicoderma/metadata.hpp"

namespace dicoderma {

std::string to_decimal(Uint128 value) {
  if (value == 0) return "0";
  std::string digits;
  while (value != 0) {
    digits += static_cast<char>('0' + static_cast<int>(value % 10));
    value /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

Uint128 RandomEntropy::next() {
  std::lock_guard lock(mutex_);
  Uint128 value = 0;
  for (int i = 0; i < 4; ++i) value = (value << 32) | static_cast<std::uint32_t>(device_());
  return value;
}

Uint128 SeededEntropy::next() {
  std::lock_guard lock(mutex_);
  const Uint128 high = engine_();
  return (high << 64) | engine_();
}

UidContext UidContext::random(std::string root) {
  return UidContext{std::move(root), std::make_shared<RandomEntropy>()};
}

UidContext UidContext::seeded(std::uint64_t seed, std::string root) {
  return UidContext{std::move(root), std::make_shared<SeededEntropy>(seed)};
}

std::string make_uid(std::string_view root, Uint128 value) {
  if (!is_valid_uid(root)) {
    if (root.size() > 64) throw Error(ErrorCode::UidTooLong, "UID root longer than 64 characters");
    throw std::invalid_argument("UID root is not dotted decimal: " + std::string(root));
  }
  std::string uid = std::string(root) + "." + to_decimal(value);
  if (uid.size() > 64) {
    throw Error(ErrorCode::UidTooLong, "UID would be " + std::to_string(uid.size()) + " characters");
  }
  return uid;
}

std::string generate_uid(UidContext& ctx) { return make_uid(ctx.root, ctx.source->next()); }

}  // namespace dicoderma
