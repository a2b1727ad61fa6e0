#pragma once

#include <ostream>

namespace facmap::cli {

// sysexits-style codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDataErr = 65;
inline constexpr int kExitNoInput = 66;
inline constexpr int kExitIoErr = 74;

/// Entry point of the facmap tool. Subcommands: synth, grid, score, detect,
/// metrics, select-threshold, match, report, serve.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace facmap::cli
