#pragma once

#include <iosfwd>

namespace resilsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitInvalidScenario = 3;
inline constexpr int kExitOutputFailure = 4;

/// resilsim validate|run|compare --scenario <path> [--seed N] [--out DIR]
///          [--trace] [--toggle NAME]...
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace resilsim::cli
