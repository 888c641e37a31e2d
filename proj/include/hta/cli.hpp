#pragma once

#include <string>
#include <vector>

namespace hta {

/// Environment variable that supplies the default output directory.
inline constexpr const char* kOutDirEnv = "HTA_OUT_DIR";

/// Runs the command line front end. Returns 0 on success, 2 on a usage error and
/// 1 on a runtime failure.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace hta
