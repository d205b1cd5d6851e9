// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fnndg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputDirEnv = "FNNDG_OUTPUT_DIR";

/// Runs one CLI invocation. `args` excludes the program name.
/// Returns 0 on success, 1 on configuration/usage errors, 2 on runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace fnndg::cli
