#pragma once

// Batch command line: run | calibrate | ece | attack | pds | export-chain.
//
// Each command writes into a fresh output directory that appears only once
// complete, together with a summary.json listing every file and its SHA-256.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace greenbtc::cli {

/// Parses argv and dispatches. Returns the process exit code; diagnostics go
/// to `err`, human-readable results to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Seed precedence: GREENBTC_SEED, then --seed, then the config value.
std::uint64_t resolve_seed(std::uint64_t config_seed, const std::string& flag_value);

}  // namespace greenbtc::cli
