#pragma once

#include <string>
#include <vector>

namespace trajfuse::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Environment variable naming the directory used when --out is omitted.
inline constexpr const char* kOutDirEnv = "TRAJFUSE_OUT_DIR";

/// Runs the command line `args` (args[0] is the program name). Errors are
/// reported on stderr as one JSON object per line.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace trajfuse::cli
