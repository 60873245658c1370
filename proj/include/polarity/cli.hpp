#pragma once

#include <iosfwd>

namespace polarity::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for the `polarity` tool. Subcommands: synth, train, predict, experiment, serve.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace polarity::cli
