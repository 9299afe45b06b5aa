#include "rpsft/checkpoint.hpp"
#include "rpsft/config.hpp"
#include "rpsft/error.hpp"
#include "rpsft/presets.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "rpsft_out";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config_path, "key = value config file");
    app->add_option("--out", f.out_dir, "output directory");
    app->add_option("--seed", f.seed, "master seed (overrides the config)");
    app->add_option("--set", f.sets, "override key=value (repeatable)")->allow_extra_args(false);
}

void run(const rpsft::CommandSpec& spec, const CommonFlags& f) {
    std::vector<std::string> overrides = f.sets;
    if (f.seed) {
        overrides.push_back("seed=" + std::to_string(*f.seed));
    }
    std::optional<std::filesystem::path> path;
    if (!f.config_path.empty()) {
        path = f.config_path;
    }
    const rpsft::Config config = rpsft::load_config(spec.schema, path, overrides);
    rpsft::run_command(spec, config, f.out_dir);
}

void print_schema(const rpsft::CommandSpec& spec) {
    std::cout << spec.name << ": " << spec.summary << "\n";
    for (const auto& k : spec.schema) {
        std::cout << "  " << k.key << " = " << k.default_value << "    # " << k.help << "\n";
    }
}

void inspect(const std::string& path) {
    for (const auto& [name, m] : rpsft::load_checkpoint(path)) {
        std::cout << name << " " << m.rows() << "x" << m.cols() << "\n";
    }
}

int exit_code(const rpsft::Error& e) {
    if (dynamic_cast<const rpsft::NumericalError*>(&e) || dynamic_cast<const rpsft::TrainingError*>(&e)) {
        return 3;
    }
    if (dynamic_cast<const rpsft::IoError*>(&e) || dynamic_cast<const rpsft::FormatError*>(&e)) {
        return 4;
    }
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rotation-preserving fine-tuning toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string preset_flag;
    bool show_keys = false;
    std::vector<std::pair<CLI::App*, const rpsft::CommandSpec*>> leaves;

    CLI::App* diag = app.add_subcommand("diag", "diagnostic metrics");
    diag->require_subcommand(1);
    for (const auto& spec : rpsft::command_specs()) {
        CLI::App* sub = nullptr;
        if (spec.name.rfind("diag ", 0) == 0) {
            sub = diag->add_subcommand(spec.name.substr(5), spec.summary);
        } else {
            sub = app.add_subcommand(spec.name, spec.summary);
        }
        add_common(sub, flags);
        sub->add_flag("--keys", show_keys, "list config keys with defaults and exit");
        leaves.emplace_back(sub, &spec);
    }

    CLI::App* preset = app.add_subcommand("preset", "run a named experiment pipeline");
    std::string preset_name;
    preset->add_option("name", preset_name, "preset name");
    preset->add_option("--preset", preset_flag, "preset name");
    add_common(preset, flags);
    preset->add_flag("--keys", show_keys, "list config keys with defaults and exit");
    bool list_presets = false;
    preset->add_flag("--list", list_presets, "list presets and exit");

    CLI::App* insp = app.add_subcommand("inspect", "list the tensors in a checkpoint");
    std::string inspect_path;
    insp->add_option("path", inspect_path, "checkpoint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (insp->parsed()) {
            inspect(inspect_path);
            return 0;
        }
        if (preset->parsed()) {
            if (list_presets) {
                for (const auto& s : rpsft::preset_specs()) {
                    std::cout << s.name << "    " << s.summary << "\n";
                }
                return 0;
            }
            const std::string name = preset_flag.empty() ? preset_name : preset_flag;
            if (name.empty()) {
                throw rpsft::ParameterError("a preset name is required");
            }
            const rpsft::CommandSpec& spec = rpsft::find_preset(name);
            if (show_keys) {
                print_schema(spec);
                return 0;
            }
            run(spec, flags);
            return 0;
        }
        for (const auto& [sub, spec] : leaves) {
            if (sub->parsed()) {
                if (show_keys) {
                    print_schema(*spec);
                    return 0;
                }
                run(*spec, flags);
                return 0;
            }
        }
    } catch (const rpsft::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
