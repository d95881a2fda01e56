#pragma once

// Command-line front end. `run_cli` is the whole program minus process
// plumbing, so tests can drive it in-process.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace drlab {

inline constexpr const char* kToolVersion = "drlab 0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitResource = 3,
  kExitPrecision = 4,
};

/// Runs one command. `args` excludes the program name. Results go to `out`
/// (or the --out file), diagnostics to `err` as a single line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a hash of `bytes`.
std::uint64_t fnv1a64(std::string_view bytes);

/// "fnv1a64:" followed by 16 lowercase hex digits.
std::string checksum_string(std::string_view bytes);

}  // namespace drlab
