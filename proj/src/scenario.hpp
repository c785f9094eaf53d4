#pragma once

#include <cstdint>
#include "json.hpp"
#include <optional>
#include <string>
#include <vector>

namespace ensctl {

using ojson = nlohmann::ordered_json;

const std::vector<std::string>& scenario_kinds();

// Validated scenario with every default filled in. `params` keeps the
// canonical key order and is what gets echoed.
struct ScenarioConfig {
  std::string kind;
  ojson params;
};

ScenarioConfig parse_config(const std::string& yaml_text, const std::string& source = "<config>");
ScenarioConfig load_config(const std::string& path);

// Canonical YAML rendering; parse_config(echo_yaml(c)) echoes identically.
std::string echo_yaml(const ScenarioConfig& config);

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  int threads = 1;
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 scientific failure
  std::string message;
  std::vector<std::string> outputs;  // file names relative to out_dir, manifest last
};

// Operational failures throw Error.
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

std::string sha256_file(const std::string& path);

}  // namespace ensctl
