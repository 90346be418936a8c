#pragma once

#include <filesystem>

#include "stefan/config.hpp"

namespace stefan {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
  std::filesystem::path out_dir = ".";
  unsigned jobs = 0;         // 0: hardware concurrency
  double horizon_scale = 1.0;
};

/// Executes config.command and writes its artifacts into out_dir. Files are
/// written with a ".partial" suffix and renamed once the command succeeds.
/// Returns the process exit code: 0, or exit_code_for() of the failure.
int run(const RunConfig& config, const RunOptions& opts);

}  // namespace stefan
