#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "eqgrad/scenario.hpp"

namespace eqgrad {

inline constexpr const char* eqgrad_version = "eqgrad 0.1.0";

enum ExitCode { exit_pass = 0, exit_fail = 1, exit_input = 2 };

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::map<std::string, double> tolerances;  // command-line overrides
  bool timing = true;
};

struct RunResult {
  json report;
  int exit_code = exit_pass;
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& opt = {});
// expected_kind: reject scenarios of another kind with exit 2
RunResult run_file(const std::filesystem::path& path, const RunOptions& opt = {},
                   const std::optional<std::string>& expected_kind = {});
// *.scn files in filename order; results independent of `parallel`
RunResult run_suite(const std::filesystem::path& directory, const RunOptions& opt = {}, int parallel = 1);

// drops "timing" members recursively
json strip_timing(json report);

}  // namespace eqgrad
