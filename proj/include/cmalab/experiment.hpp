#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cmalab {

using Json = nlohmann::ordered_json;

/// Any problem with a config document: syntax, unknown keys, wrong types,
/// unknown presets or recipes, badly ordered schedules.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A validated config. `resolved` carries every default and threshold the
/// recipe uses; resolving it again yields the same document.
struct ExperimentConfig {
    std::string name;
    std::string recipe;
    Json resolved;
};

ExperimentConfig resolve_config(const Json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

struct RecipeInfo {
    std::string name;
    std::string description;
};

/// Alphabetical.
std::vector<RecipeInfo> list_recipes();

/// Text table printed by `list`.
std::string recipe_table();

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "CMALAB_OUTPUT_ROOT";

struct RunOptions {
    std::optional<std::filesystem::path> output_root;  ///< overrides config and environment
    bool single_thread = false;
};

enum ExitCode : int { kSuccess = 0, kConfigFailure = 1, kNonConvergence = 2 };

struct RunResult {
    int exit_code = kSuccess;
    std::filesystem::path directory;
    Json summary;
    std::string message;
};

/// Runs a recipe into <root>/<name>. A config error leaves no directory
/// behind; a non-converged solve keeps partial artifacts plus a FAILED
/// marker. An existing directory is replaced only if it carries the run
/// marker written by an earlier run.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace cmalab
