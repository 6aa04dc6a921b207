#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rawforge {

enum class LogLevel { Quiet, Info, Debug };

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::optional<int> threads;  // RAWFORGE_THREADS or hardware concurrency when unset
  LogLevel log_level = LogLevel::Info;
  std::optional<std::string> config_path;
};

/// Exit codes returned by dispatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitCheckFailed = 3;

/// Runs one subcommand. `args` excludes the program name. Machine-readable
/// output goes to `out` as JSON, human-readable notes to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rawforge
