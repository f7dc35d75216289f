#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBackend = 3;

/// Entry point of the `icx` binary. Diagnostics go to `err`; documents are
/// written to --output, or to `out` when no path is given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// Timestamp recorded in documents: the --timestamp value if given ("now" is
/// the current UTC time), else SOURCE_DATE_EPOCH, else the Unix epoch.
std::string resolve_timestamp(const std::string& flag);

}  // namespace icx::cli
