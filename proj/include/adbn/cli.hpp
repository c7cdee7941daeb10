#pragma once

#include <iostream>

namespace adbn {

// Exit codes, stable and documented in the README:
//   0 success, 1 unexpected failure, 2 invalid configuration/usage,
//   3 dataset or I/O error, 4 numeric blow-up (last-good checkpoint kept),
//   5 checkpoint/cache version or preprocessing-descriptor mismatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitFormat = 5;

/// Full command-line surface; `main` is a thin wrapper around this so tests
/// can drive the real argument parsing in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace adbn
