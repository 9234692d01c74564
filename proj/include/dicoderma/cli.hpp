#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dicoderma::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitTagged = 3;

inline constexpr const char* kSecretEnv = "DICODERMA_SECRET";

/// Runs one invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// ISO-8601 date-time ("2021-03-01T09:30:00", "2021-03-01 09:30", "2021-03-01")
/// to DICOM DA and TM. Returns false on malformed input.
bool split_iso_datetime(const std::string& text, std::string& da, std::string& tm);

}  // namespace dicoderma::cli
