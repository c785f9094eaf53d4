#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ensctl.h"
#include "json.hpp"

namespace {

const char* const kKinds[] = {"rigid-check",     "rigid-generic", "model-synthesize", "lieext-reduce",
                              "lieext-converge", "flow-verify",   "rank-check"};

int operational(const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
  return 1;
}

int api_failure(ensctl_status st) { return operational(ensctl_status_name(st), ensctl_last_error()); }

struct Common {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

int run(const std::string& command, const Common& c) {
  ensctl_scenario* s = nullptr;
  ensctl_status st = ensctl_scenario_load(c.config.c_str(), &s);
  if (st != ENSCTL_OK) return api_failure(st);
  std::string kind = ensctl_scenario_kind(s);
  if (command != "run" && kind != command) {
    ensctl_scenario_free(s);
    return operational("config", "config kind '" + kind + "' does not match subcommand '" + command + "'");
  }
  int exit_code = 0;
  char* message = nullptr;
  st = ensctl_scenario_run(s, c.out_dir.c_str(), c.seed.has_value(), c.seed.value_or(0), c.threads, &exit_code,
                           &message);
  ensctl_scenario_free(s);
  if (st != ENSCTL_OK) return api_failure(st);
  std::string msg = message ? message : "";
  ensctl_string_free(message);
  if (exit_code != 0) {
    nlohmann::ordered_json j;
    j["failure"] = "scientific";
    j["kind"] = kind;
    j["message"] = msg;
    std::cerr << j.dump() << "\n";
  }
  return exit_code;
}

int echo(const std::string& path) {
  ensctl_scenario* s = nullptr;
  ensctl_status st = ensctl_scenario_load(path.c_str(), &s);
  if (st != ENSCTL_OK) return api_failure(st);
  char* yaml = nullptr;
  st = ensctl_scenario_echo(s, &yaml);
  ensctl_scenario_free(s);
  if (st != ENSCTL_OK) return api_failure(st);
  std::fputs(yaml, stdout);
  ensctl_string_free(yaml);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble controllability toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ensctl_version()));

  Common common;
  std::uint64_t seed = 0;
  std::string selected;
  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", common.config, "Scenario YAML file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", common.out_dir, "Directory for artifacts")->capture_default_str();
    sub->add_option("--seed-override", seed, "Replace the configured seed");
    sub->add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->callback([&, name, sub] {
      selected = name;
      if (sub->count("--seed-override")) common.seed = seed;
    });
  };
  for (const char* k : kKinds) add(k, std::string("Run a ") + k + " scenario");
  add("run", "Run any scenario, dispatching on its kind");

  std::string echo_path;
  CLI::App* echo_cmd = app.add_subcommand("echo", "Print the validated config with defaults filled in");
  echo_cmd->add_option("--config", echo_path, "Scenario YAML file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return operational("usage", e.what());
  }
  if (echo_cmd->parsed()) return echo(echo_path);
  return run(selected, common);
}
