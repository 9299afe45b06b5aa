#include "rpsft/checkpoint.hpp"
#include "rpsft/error.hpp"
#include "rpsft/presets.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rpsft;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rpsft_presets_" + name);
    fs::remove_all(p);
    return p;
}

Config config_for(const CommandSpec& spec, const std::vector<std::string>& overrides) {
    return parse_config(spec.schema, "", overrides);
}

} // namespace

TEST(Presets, UnknownNameListsValid) {
    try {
        find_preset("nope");
        FAIL();
    } catch (const ParameterError& e) {
        EXPECT_NE(std::string(e.what()).find("rank-sweep"), std::string::npos);
    }
    EXPECT_THROW(find_command("diag nope"), ParameterError);
}

TEST(Presets, AllNamesPresent) {
    for (const char* n : {"fig2-energy", "rank-sweep", "drift-bound", "gradflow", "forgetting-tradeoff", "rotation",
                          "hidden-drift"}) {
        EXPECT_NO_THROW(find_preset(n));
    }
    for (const char* n : {"train", "gradflow", "rankselect", "diag fisher", "diag firstorder", "diag rotation",
                          "diag drift", "diag entropy"}) {
        EXPECT_NO_THROW(find_command(n));
    }
}

TEST(Presets, GradflowResidual) {
    const CommandSpec& spec = find_preset("gradflow");
    const fs::path out = scratch("gradflow");
    run_command(spec, config_for(spec, {"flow.t_end=1"}), out);
    const std::string residual = slurp(out / "residual.csv");
    EXPECT_EQ(residual.rfind("# rpsft gradflow\n# seed = 0\n", 0), 0u);
    EXPECT_NE(residual.find("\nconstant,"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "manifest.txt"));
}

TEST(Presets, RankSweepZeroRowIsSft) {
    const CommandSpec& spec = find_preset("rank-sweep");
    const fs::path out = scratch("sweep");
    run_command(spec,
                config_for(spec, {"arch=linear", "task.input_dim=8", "task.output_dim=6", "task.a_dominant_dims=0",
                                  "task.a_background_std=1", "pretrain.steps=200", "pretrain.lr=0.1",
                                  "finetune.steps=40", "sweep.ranks=0,2"}),
                out);
    std::istringstream in(slurp(out / "rank_sweep.csv"));
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') {
            rows.push_back(line);
        }
    }
    ASSERT_GE(rows.size(), 4u);
    EXPECT_EQ(rows[1].substr(rows[1].find(',')), rows[2].substr(rows[2].find(',')));
}

TEST(Presets, RerunIsByteIdentical) {
    const CommandSpec& spec = find_command("rankselect");
    const fs::path a = scratch("rs_a");
    const fs::path b = scratch("rs_b");
    const Config c = config_for(spec, {"seed=11"});
    run_command(spec, c, a);
    run_command(spec, c, b);
    for (const char* f : {"curves.csv", "boundary.csv", "thresholds.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
}

TEST(Presets, StageNamedInError) {
    const CommandSpec& spec = find_command("diag fisher");
    try {
        run_command(spec, config_for(spec, {"model=/nonexistent.rpsv"}), scratch("fisher"));
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("stage 'load'"), std::string::npos);
    }
}

TEST(Presets, TrainWritesCheckpoints) {
    const CommandSpec& spec = find_command("train");
    const fs::path out = scratch("train");
    run_command(spec, config_for(spec, {"finetune.steps=20", "pretrain.steps=100", "pretrain.lr=0.2", "reg.k=2"}),
                out);
    const ModelParams m = model_from_tensors(load_checkpoint(out / "model.rpsv"));
    EXPECT_EQ(m.architecture(), Architecture::linear);
    EXPECT_EQ(bases_from_tensors(load_checkpoint(out / "bases.rpsv")).at("linear.weight").k(), 2u);
    const std::string trace = slurp(out / "trace.csv");
    EXPECT_NE(trace.find("step,task_loss,penalty,total_loss,drift:linear.weight,grad_norm:linear.weight"),
              std::string::npos);
}
