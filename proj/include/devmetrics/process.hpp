#pragma once

#include <string>
#include <vector>

namespace devmetrics {

struct ProcessResult {
  int exit_code = -1;
  std::string out;
};

/// Runs argv[0] from PATH with no shell, capturing stdout; stderr is discarded.
/// Throws std::system_error when the process cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv);

}  // namespace devmetrics
