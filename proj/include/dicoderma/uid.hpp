#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

namespace dicoderma {

using Uint128 = unsigned __int128;

std::string to_decimal(Uint128 value);

/// Thread-safe supplier of 128-bit values for UID generation.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual Uint128 next() = 0;
};

/// Draws from std::random_device.
class RandomEntropy final : public EntropySource {
 public:
  Uint128 next() override;

 private:
  std::mutex mutex_;
  std::random_device device_;
};

/// Deterministic sequence for reproducible output in tests.
class SeededEntropy final : public EntropySource {
 public:
  explicit SeededEntropy(std::uint64_t seed) : engine_(seed) {}
  Uint128 next() override;

 private:
  std::mutex mutex_;
  std::mt19937_64 engine_;
};

inline constexpr std::string_view kDefaultUidRoot = "2.25";

struct UidContext {
  std::string root{kDefaultUidRoot};
  std::shared_ptr<EntropySource> source = std::make_shared<RandomEntropy>();

  static UidContext random(std::string root = std::string(kDefaultUidRoot));
  static UidContext seeded(std::uint64_t seed, std::string root = std::string(kDefaultUidRoot));
};

/// root + "." + decimal(value). Throws Error{UidTooLong} past 64 characters
/// and std::invalid_argument for a root that is not a valid UID.
std::string make_uid(std::string_view root, Uint128 value);

std::string generate_uid(UidContext& ctx);

}  // namespace dicoderma
