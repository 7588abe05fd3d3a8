#pragma once

#include <iosfwd>

namespace qcfg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitCapacity = 3;

// The qcfg command line. Subcommands: induce, fit, parse, sample, augment,
// relabel, eval, run, scan-splits.
int RunCli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
           std::ostream& err);

}  // namespace qcfg
