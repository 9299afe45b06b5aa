#pragma once

#include "rpsft/config.hpp"
#include "rpsft/toy_trainer.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace rpsft {

using Runner = std::function<void(const Config&, const std::filesystem::path&)>;

struct CommandSpec {
    std::string name;
    std::string summary;
    Schema schema;
    Runner run;
};

/// train, gradflow, rankselect and "diag fisher|firstorder|rotation|drift|entropy".
const std::vector<CommandSpec>& command_specs();
/// fig2-energy, rank-sweep, drift-bound, gradflow, forgetting-tradeoff, rotation, hidden-drift.
const std::vector<CommandSpec>& preset_specs();

/// Throws ParameterError listing the valid names.
const CommandSpec& find_command(std::string_view name);
const CommandSpec& find_preset(std::string_view name);

/// Forgetting-experiment settings from a forgetting-tradeoff preset config.
ForgettingConfig forgetting_config(const Config& config);

/// Header lines written at the top of every output file: the command and the
/// resolved configuration, seed included.
std::vector<std::string> output_header(const CommandSpec& spec, const Config& config);

/// Creates out_dir, runs the command and writes manifest.txt (config plus
/// wall time as comments). The manifest parses back as a config file.
/// Module errors are rethrown with the failing stage prefixed.
void run_command(const CommandSpec& spec, const Config& config, const std::filesystem::path& out_dir);

} // namespace rpsft
