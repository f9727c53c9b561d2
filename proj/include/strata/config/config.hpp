#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "strata/llm/gateway.hpp"
#include "strata/planner/research.hpp"

namespace strata::config {

// Looks up an environment variable; nullopt when unset.
using EnvFn = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

struct TomlEntry {
    nlohmann::json value;
    int line = 0;
};

// The subset of TOML the config needs: [dotted.sections], bare keys, strings
// (basic and literal), integers, floats, booleans and arrays, # comments.
// "${NAME}" inside basic strings is replaced from `env`; unset names are
// reported through `unset` as "key: NAME" and replaced by "".
// Keys come back flattened ("section.key"). Syntax errors are appended to
// `diagnostics` as "<source>:<line>: ...".
std::map<std::string, TomlEntry> parse_toml(std::string_view text, const std::string& source, const EnvFn& env,
                                            std::vector<std::string>& diagnostics, std::vector<std::string>* unset = nullptr);

struct ModelConfig {
    llm::RoleSettings settings;
    std::string api_key;  // resolved
    double timeout_s = 120.0;
};

struct SandboxConfig {
    std::vector<std::string> command;  // live executor, e.g. ["python3", "sandbox/run_payload.py"]
    int grace_s = 5;
};

struct WebConfig {
    std::string search_endpoint;
    std::string api_key;
    std::string api_key_header = "X-API-KEY";
    int timeout_s = 15;
};

// Scripted stand-ins used by --offline.
struct OfflineConfig {
    std::filesystem::path script;   // scripted model backend
    std::filesystem::path sandbox;  // scripted sandbox rules
    std::filesystem::path web;      // recorded search results and pages
    std::filesystem::path judge_script;  // scripted judges for eval; defaults to `script`
};

struct EvalConfig {
    std::filesystem::path criteria;  // empty: built-in default set
    std::filesystem::path judge_cache = ".judge_cache";
    std::filesystem::path points_dir = "points";
    std::filesystem::path scores_dir = "scores";
};

struct RunConfig {
    std::filesystem::path source;
    bool offline = false;
    std::uint64_t seed = 0;
    std::filesystem::path tables;
    std::optional<std::filesystem::path> embedding_cache;
    planner::EngineOptions engine;
    std::map<llm::ModelRole, ModelConfig> models;
    llm::RetryPolicy retry;
    SandboxConfig sandbox;
    WebConfig web;
    OfflineConfig offline_inputs;
    EvalConfig eval;
    std::map<std::string, std::string> unset_env;  // key -> unset variable it referenced

    llm::GatewayConfig gateway_config() const;
    // Resolved values with secrets redacted.
    nlohmann::json to_json() const;
};

// Parses and validates everything that does not depend on the command.
// Relative paths resolve against the config file's directory. Throws
// ConfigError carrying one "key: problem" diagnostic per issue.
RunConfig parse_config(std::string_view text, const std::filesystem::path& source, bool force_offline,
                       const EnvFn& env = process_env);
RunConfig load_config(const std::filesystem::path& path, bool force_offline, const EnvFn& env = process_env);

// Command-specific checks: the table bundle exists, the offline inputs or
// the live endpoints and keys are present.
void require_for_run(const RunConfig& config);
void require_for_ingest(const RunConfig& config);
// Judge roles for the eval commands (offline: the judge script).
void require_models(const RunConfig& config, const std::vector<llm::ModelRole>& roles);

}  // namespace strata::config
