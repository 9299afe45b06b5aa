#include "rpsft/presets.hpp"

#include "rpsft/checkpoint.hpp"
#include "rpsft/csv.hpp"
#include "rpsft/diagnostics.hpp"
#include "rpsft/error.hpp"
#include "rpsft/grad_flow.hpp"
#include "rpsft/rank_select.hpp"
#include "rpsft/rng.hpp"
#include "rpsft/toy_trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace rpsft {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- schema helpers

KeySpec real_key(std::string key, std::string def, std::string help, std::optional<double> min = {},
                 bool above_min = false, std::optional<double> max = {}) {
    KeySpec s;
    s.key = std::move(key);
    s.type = KeyType::real;
    s.default_value = std::move(def);
    s.help = std::move(help);
    s.min = min;
    s.above_min = above_min;
    s.max = max;
    return s;
}

KeySpec int_key(std::string key, std::string def, std::string help, std::optional<double> min = {},
                std::optional<double> max = {}) {
    KeySpec s;
    s.key = std::move(key);
    s.type = KeyType::integer;
    s.default_value = std::move(def);
    s.help = std::move(help);
    s.min = min;
    s.max = max;
    return s;
}

KeySpec typed_key(std::string key, KeyType type, std::string def, std::string help,
                  std::vector<std::string> choices = {}) {
    KeySpec s;
    s.key = std::move(key);
    s.type = type;
    s.default_value = std::move(def);
    s.help = std::move(help);
    s.choices = std::move(choices);
    return s;
}

KeySpec seed_key() {
    return typed_key("seed", KeyType::unsigned64, "0", "master seed");
}

void append(Schema& to, const Schema& from) {
    to.insert(to.end(), from.begin(), from.end());
}

struct TaskDefaults {
    std::string arch = "two_layer_tanh";
    std::string input_dim = "32";
    std::string output_dim = "16";
    std::string hidden_dim = "32";
    std::string rotation_angle = "90";
    std::string noise_std = "0.05";
    std::string n_train = "256";
    std::string n_eval = "256";
    std::string a_dominant_dims = "6";
    std::string a_background_std = "0.2";
};

Schema task_keys(const TaskDefaults& d = {}) {
    return {
        typed_key("arch", KeyType::text, d.arch, "model architecture",
                  {"linear", "two_layer_tanh", "linear_softmax_classifier"}),
        int_key("task.input_dim", d.input_dim, "input features", 1),
        int_key("task.output_dim", d.output_dim, "outputs", 1),
        int_key("task.hidden_dim", d.hidden_dim, "hidden width (two_layer_tanh)", 1),
        real_key("task.rotation_angle", d.rotation_angle, "degrees between the two teachers"),
        real_key("task.noise_std", d.noise_std, "target noise", 0.0),
        int_key("task.n_train", d.n_train, "training samples per task", 1),
        int_key("task.n_eval", d.n_eval, "evaluation samples per task", 1),
        int_key("task.a_dominant_dims", d.a_dominant_dims, "task-A input directions at unit variance (0: isotropic)",
                0),
        real_key("task.a_background_std", d.a_background_std, "task-A input std outside the dominant directions",
                 0.0),
    };
}

Schema pretrain_keys() {
    return {
        int_key("pretrain.steps", "2000", "task-A gradient steps", 1),
        real_key("pretrain.lr", "0.05", "task-A learning rate", 0.0, true),
        real_key("pretrain.loss_threshold", "1", "maximum task-A eval loss after pretraining", 0.0, true),
    };
}

Schema finetune_keys(const std::string& steps, const std::string& target_fraction) {
    return {
        real_key("finetune.lr", "0.05", "task-B learning rate", 0.0, true),
        int_key("finetune.steps", steps, "maximum task-B steps", 1),
        int_key("finetune.batch_size", "256", "minibatch size (>= n_train: full batch)", 1),
        real_key("finetune.target_fraction", target_fraction,
                 "stop once task-B train loss reaches this fraction of its initial value (0: run all steps)", 0.0,
                 false, 1.0),
        real_key("reg.lambda", "1", "penalty strength", 0.0),
        typed_key("reg.k", KeyType::rank, "auto", "protected rank, or auto for the energy rule"),
        real_key("reg.energy_target", "0.2", "gradient-energy fraction for reg.k = auto", 0.0, true, 1.0),
        typed_key("reg.energy_layer", KeyType::text, "", "layer whose energy curve sets reg.k (empty: first layer)"),
        int_key("reg.update_period", "1", "penalty every this many steps", 1),
        typed_key("reg.layers", KeyType::text_list, "*", "layer name patterns to protect"),
    };
}

// ---------------------------------------------------------------- stages

[[noreturn]] void rethrow_in_stage(const std::string& stage) {
    const std::string p = "stage '" + stage + "': ";
    try {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const FormatError&) {
        throw;
    } catch (const TrainingError& e) {
        throw TrainingError(p + e.what(), e.step());
    } catch (const NumericalError& e) {
        throw NumericalError(p + e.what());
    } catch (const ParameterError& e) {
        throw ParameterError(p + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(p + e.what());
    } catch (const IoError& e) {
        throw IoError(p + e.what());
    }
}

template <typename F>
auto stage(const std::string& name, F&& f) {
    try {
        return f();
    } catch (const Error&) {
        rethrow_in_stage(name);
    }
}

// ---------------------------------------------------------------- pipeline pieces

TaskPairSpec task_spec(const Config& c, std::uint64_t seed) {
    TaskPairSpec s;
    s.input_dim = c.count("task.input_dim");
    s.output_dim = c.count("task.output_dim");
    s.rotation_angle = c.real("task.rotation_angle");
    s.noise_std = c.real("task.noise_std");
    s.n_train = c.count("task.n_train");
    s.n_eval = c.count("task.n_eval");
    s.a_dominant_dims = c.count("task.a_dominant_dims");
    s.a_background_std = c.real("task.a_background_std");
    s.seed = seed;
    return s;
}

PretrainConfig pretrain_config(const Config& c, std::uint64_t seed) {
    PretrainConfig p;
    p.train.mode = TrainMode::sft;
    p.train.learning_rate = c.real("pretrain.lr");
    p.train.steps = c.count("pretrain.steps");
    p.train.batch_size = c.count("task.n_train");
    p.train.reg.lambda = 0.0;
    p.train.seed = seed;
    p.hidden_dim = c.count("task.hidden_dim");
    p.loss_threshold = c.real("pretrain.loss_threshold");
    return p;
}

struct Pretrained {
    SyntheticTaskPair pair;
    ModelParams model0;
};

Pretrained pretrained(const Config& c, std::uint64_t seed) {
    SyntheticTaskPair pair = stage("task", [&] { return make_task_pair(task_spec(c, seed)); });
    ModelParams model0 = stage("pretrain", [&] {
        return pretrain(parse_architecture(c.text("arch")), pair.task_A, pretrain_config(c, Rng::derive(seed, 101)));
    });
    return {std::move(pair), std::move(model0)};
}

std::string energy_layer(const Config& c, const ModelParams& model) {
    const std::string& named = c.text("reg.energy_layer");
    return named.empty() ? model.layers().begin()->first : named;
}

std::size_t resolve_rank(const Config& c, const Pretrained& p) {
    if (auto k = c.rank("reg.k")) {
        return *k;
    }
    return stage("energy rank", [&] {
        return energy_rank(p.model0, p.pair.task_A, energy_layer(c, p.model0), c.real("reg.energy_target")).rank;
    });
}

/// Bases at rank k, capped at each selected layer's min(m, n).
BasisSet capped_bases(const ModelParams& model, const std::vector<std::string>& selector, std::size_t k) {
    BasisSet out;
    if (k == 0) {
        return out;
    }
    RegularizerConfig sel;
    sel.layer_selector = selector;
    for (const auto& [name, w] : model.layers()) {
        if (sel.selects(name)) {
            out.emplace(name, build_basis(name, w, std::min({k, w.rows(), w.cols()})));
        }
    }
    if (out.empty()) {
        throw ParameterError("reg.layers matches no layer");
    }
    return out;
}

TrainConfig finetune_config(const Config& c, TrainMode mode, std::size_t k, std::uint64_t seed) {
    TrainConfig t;
    t.mode = mode;
    t.learning_rate = c.real("finetune.lr");
    t.steps = c.count("finetune.steps");
    t.batch_size = c.count("finetune.batch_size");
    t.reg.lambda = mode == TrainMode::sft ? 0.0 : c.real("reg.lambda");
    t.reg.k = mode == TrainMode::sft ? 0 : k;
    t.reg.update_period = c.count("reg.update_period");
    t.reg.layer_selector = c.texts("reg.layers");
    t.seed = seed;
    return t;
}

struct Arm {
    std::string name;
    TrainMode mode;
    std::size_t k;
};

struct ArmResult {
    TrainResult result;
    BasisSet bases;
};

ArmResult run_arm(const Config& c, const Pretrained& p, const Arm& arm, std::uint64_t seed) {
    return stage("finetune " + arm.name, [&] {
        TrainConfig t = finetune_config(c, arm.mode, arm.k, Rng::derive(seed, 202));
        const double fraction = c.real("finetune.target_fraction");
        if (fraction > 0.0) {
            t.stop_loss = fraction * evaluate(p.model0, p.pair.task_B, Split::train);
        }
        BasisSet bases;
        if (arm.mode == TrainMode::l2_init) {
            bases = capped_bases(p.model0, t.reg.layer_selector, kFullRank);
        } else if (arm.mode == TrainMode::rpsft) {
            bases = capped_bases(p.model0, t.reg.layer_selector, arm.k);
        }
        TrainResult r = train_rpsft(p.model0, p.pair.task_B, bases, t);
        return ArmResult{std::move(r), std::move(bases)};
    });
}

CsvTable trace_table(const std::vector<std::string>& header, const TrainTrace& trace) {
    std::vector<std::string> cols{"step", "task_loss", "penalty", "total_loss"};
    for (const auto& l : trace.drift_layers) {
        cols.push_back("drift:" + l);
    }
    for (const auto& l : trace.grad_layers) {
        cols.push_back("grad_norm:" + l);
    }
    CsvTable t(header, cols);
    for (const auto& r : trace.records) {
        std::vector<std::string> row{format_number(std::uint64_t{r.step}), format_number(r.task_loss),
                                     format_number(r.penalty), format_number(r.total_loss)};
        for (double d : r.drift) {
            row.push_back(format_number(d));
        }
        for (double g : r.grad_norm) {
            row.push_back(format_number(g));
        }
        t.add_row(std::move(row));
    }
    return t;
}

std::string num(double v) {
    return format_number(v);
}

std::string num(std::size_t v) {
    return format_number(static_cast<std::uint64_t>(v));
}

const TaskData& task_of(const Pretrained& p, const std::string& which) {
    return which == "A" ? p.pair.task_A : p.pair.task_B;
}

// ---------------------------------------------------------------- commands

void run_train(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const std::uint64_t seed = c.seed();
    const Pretrained p = pretrained(c, seed);
    const TrainMode mode = parse_train_mode(c.text("train.mode"));
    const std::size_t k = mode == TrainMode::rpsft ? resolve_rank(c, p) : 0;
    const ArmResult arm = run_arm(c, p, {std::string(to_string(mode)), mode, k}, seed);

    stage("write outputs", [&] {
        trace_table(header, arm.result.trace).write(out / "trace.csv");
        save_checkpoint(out / "model0.rpsv", to_tensors(p.model0));
        save_checkpoint(out / "model.rpsv", to_tensors(arm.result.model));
        if (!arm.bases.empty()) {
            save_checkpoint(out / "bases.rpsv", to_tensors(arm.bases));
        }
        CsvTable s(header, {"metric", "value"});
        s.add_row({"k", num(k)});
        s.add_row({"steps", num(arm.result.trace.records.size())});
        s.add_row({"task_a_eval_before", num(evaluate(p.model0, p.pair.task_A, Split::eval))});
        s.add_row({"task_a_eval_after", num(evaluate(arm.result.model, p.pair.task_A, Split::eval))});
        s.add_row({"task_b_train_before", num(evaluate(p.model0, p.pair.task_B, Split::train))});
        s.add_row({"task_b_train_after", num(evaluate(arm.result.model, p.pair.task_B, Split::train))});
        s.write(out / "summary.csv");
        return 0;
    });
}

struct FlowSetup {
    DenseMatrix W0;
    ProtectedBasis basis;
    std::unique_ptr<Forcing> forcing;
    FlowConfig flow;
    bool constant = false;
    DenseMatrix G_projected;
};

FlowSetup flow_setup(const Config& c, const std::string& forcing) {
    Rng rng(Rng::derive(c.seed(), 303));
    const std::size_t m = c.count("flow.rows");
    const std::size_t n = c.count("flow.cols");
    DenseMatrix W0 = rng.gaussian(m, n);
    const DenseMatrix G = rng.gaussian(m, n);
    ProtectedBasis basis = build_basis("flow", W0, c.count("flow.k"));
    FlowConfig fc;
    fc.lambda = c.real("flow.lambda");
    fc.t_end = c.real("flow.t_end");
    fc.dt = c.real("flow.dt");
    std::unique_ptr<Forcing> f;
    bool constant = false;
    if (forcing == "constant") {
        f = std::make_unique<ConstantForcing>(G);
        constant = true;
    } else if (forcing == "zero") {
        f = std::make_unique<ConstantForcing>(DenseMatrix(m, n, 0.0));
        constant = true;
    } else if (forcing == "sinusoidal") {
        f = std::make_unique<SinusoidalForcing>(G, c.real("flow.omega"));
    } else {
        f = std::make_unique<QuadraticForcing>(DenseMatrix(m, n, c.real("flow.curvature")), W0 + G);
    }
    DenseMatrix gp = matmul(matmul_tn(basis.U_k().columns(), f->gradient(W0, 0.0)), basis.V_k().columns());
    return {std::move(W0), std::move(basis), std::move(f), fc, constant, std::move(gp)};
}

struct FlowOutcome {
    FlowTrace trace;
    double volterra = 0.0;
    std::optional<double> closed_form_deviation;
};

FlowOutcome run_flow(const FlowSetup& s) {
    FlowOutcome o;
    o.trace = integrate_flow(s.W0, s.basis, *s.forcing, s.flow);
    o.volterra = volterra_residual(o.trace, s.flow.lambda);
    if (s.constant) {
        const DenseMatrix A0(s.G_projected.rows(), s.G_projected.cols(), 0.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < o.trace.times.size(); ++i) {
            const DenseMatrix ref = closed_form_constant(s.G_projected, s.flow.lambda, A0, o.trace.times[i]);
            worst = std::max(worst, max_abs_diff(ref, o.trace.A_series[i]));
        }
        o.closed_form_deviation = worst;
    }
    return o;
}

CsvTable flow_table(const std::vector<std::string>& header, const FlowTrace& trace, std::size_t every) {
    const std::size_t k = trace.A_series.front().rows();
    std::vector<std::string> cols{"t"};
    for (const char* name : {"A", "G"}) {
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                cols.push_back(std::string(name) + "_" + std::to_string(i) + "_" + std::to_string(j));
            }
        }
    }
    CsvTable t(header, cols);
    for (std::size_t s = 0; s < trace.times.size(); ++s) {
        if (s % every != 0 && s + 1 != trace.times.size()) {
            continue;
        }
        std::vector<std::string> row{num(trace.times[s])};
        for (const auto* series : {&trace.A_series, &trace.G_series}) {
            for (double v : (*series)[s].data()) {
                row.push_back(num(v));
            }
        }
        t.add_row(std::move(row));
    }
    return t;
}

Schema flow_keys(const std::string& forcing_default) {
    return {
        seed_key(),
        typed_key("flow.forcing", KeyType::text, forcing_default, "task gradient model",
                  {"constant", "zero", "sinusoidal", "quadratic"}),
        real_key("flow.lambda", "1", "penalty strength", 0.0),
        real_key("flow.t_end", "5", "integration horizon", 0.0, true),
        real_key("flow.dt", "0.001", "RK4 step", 0.0, true),
        int_key("flow.rows", "6", "weight rows", 1),
        int_key("flow.cols", "5", "weight columns", 1),
        int_key("flow.k", "2", "protected rank", 1),
        real_key("flow.omega", "4", "angular frequency of sinusoidal forcing", 0.0),
        real_key("flow.curvature", "1", "curvature of quadratic forcing", 0.0, true),
        int_key("flow.record_every", "10", "write every n-th step to the trace CSV", 1),
    };
}

void write_flow_residuals(const std::vector<std::string>& header, const fs::path& path,
                          const std::vector<std::pair<std::string, FlowOutcome>>& runs) {
    CsvTable t(header, {"forcing", "volterra_residual", "closed_form_max_deviation"});
    for (const auto& [name, o] : runs) {
        t.add_row({name, num(o.volterra), o.closed_form_deviation ? num(*o.closed_form_deviation) : "nan"});
    }
    t.write(path);
}

void run_gradflow(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const std::string forcing = c.text("flow.forcing");
    const FlowSetup s = stage("setup", [&] { return flow_setup(c, forcing); });
    FlowOutcome o = stage("integrate", [&] { return run_flow(s); });
    stage("write outputs", [&] {
        flow_table(header, o.trace, c.count("flow.record_every")).write(out / "flow.csv");
        std::vector<std::pair<std::string, FlowOutcome>> runs;
        runs.emplace_back(forcing, std::move(o));
        write_flow_residuals(header, out / "residual.csv", runs);
        return 0;
    });
}

void run_gradflow_preset(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    std::vector<std::pair<std::string, FlowOutcome>> runs;
    for (const std::string forcing : {"constant", "zero", "sinusoidal", "quadratic"}) {
        const FlowSetup s = stage("setup " + forcing, [&] { return flow_setup(c, forcing); });
        FlowOutcome o = stage("integrate " + forcing, [&] { return run_flow(s); });
        stage("write " + forcing, [&] {
            flow_table(header, o.trace, c.count("flow.record_every")).write(out / ("flow_" + forcing + ".csv"));
            return 0;
        });
        runs.emplace_back(forcing, std::move(o));
    }
    stage("write residuals", [&] {
        write_flow_residuals(header, out / "residual.csv", runs);
        return 0;
    });
}

Schema rank_keys() {
    return {
        seed_key(),
        int_key("profile.R", "6", "grid side", 1),
        int_key("profile.support", "2", "OOD sensitivity lives in the top-left block of this size", 0),
        real_key("profile.h_min", "0.5", "smallest curvature", 0.0, true),
        real_key("profile.h_max", "2", "largest curvature", 0.0, true),
        real_key("profile.c_scale", "1", "OOD sensitivity scale", 0.0),
        real_key("rank.lambda", "1", "penalty strength", 0.0),
        real_key("rank.beta", "1", "OOD weight", 0.0, true),
    };
}

CoordinateProfile seeded_profile(const Config& c) {
    const std::size_t R = c.count("profile.R");
    const std::size_t support = c.count("profile.support");
    if (support > R) {
        throw ConfigError("profile.support", ConfigError::kResolved, "exceeds profile.R");
    }
    const double h_min = c.real("profile.h_min");
    const double h_max = c.real("profile.h_max");
    if (h_max < h_min) {
        throw ConfigError("profile.h_max", ConfigError::kResolved, "is below profile.h_min");
    }
    Rng rng(Rng::derive(c.seed(), 404));
    CoordinateProfile p{rng.gaussian(R, R), DenseMatrix(R, R), DenseMatrix(R, R, 0.0)};
    for (double& h : p.h.data()) {
        h = h_min + (h_max - h_min) * rng.uniform();
    }
    for (std::size_t i = 0; i < support; ++i) {
        for (std::size_t j = 0; j < support; ++j) {
            p.c(i, j) = c.real("profile.c_scale") * rng.uniform();
        }
    }
    return p;
}

void run_rankselect(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const CoordinateProfile p = stage("profile", [&] { return seeded_profile(c); });
    const TradeoffConfig tc{c.real("rank.lambda"), c.real("rank.beta")};
    const TradeoffCurves curv = stage("curves", [&] { return curves(p, tc); });
    const RankBoundary rb = stage("rank boundary", [&] { return rank_boundary(p, tc); });
    stage("write outputs", [&] {
        CsvTable t(header, {"k", "F_ood", "G_id", "Phi"});
        for (std::size_t k = 0; k < curv.Phi.size(); ++k) {
            t.add_row({num(k), num(curv.F_ood[k]), num(curv.G_id[k]), num(curv.Phi[k])});
        }
        t.write(out / "curves.csv");
        CsvTable b(header, {"k_star", "q"});
        b.add_row({num(rb.k_star), rb.q ? num(*rb.q) : "none"});
        b.write(out / "boundary.csv");
        CsvTable th(header, {"i", "j", "g", "h", "c", "protect", "delta_id", "delta_ood", "threshold"});
        for (std::size_t i = 0; i < p.R(); ++i) {
            for (std::size_t j = 0; j < p.R(); ++j) {
                const auto d = threshold_decision(p.g(i, j), p.h(i, j), p.c(i, j), tc.lambda, tc.beta);
                th.add_row({num(i), num(j), num(p.g(i, j)), num(p.h(i, j)), num(p.c(i, j)), d.protect ? "1" : "0",
                            num(d.delta_id), num(d.delta_ood), num(d.threshold)});
            }
        }
        th.write(out / "thresholds.csv");
        return 0;
    });
}

// ---------------------------------------------------------------- diag commands

ModelParams load_model(const Config& c, const std::string& key) {
    const std::string& path = c.text(key);
    if (path.empty()) {
        throw ConfigError(key, ConfigError::kResolved, "a checkpoint path is required");
    }
    return model_from_tensors(load_checkpoint(path));
}

Schema diag_task_keys() {
    Schema s{seed_key()};
    append(s, task_keys());
    s.push_back(typed_key("task.which", KeyType::text, "A", "task whose data is used", {"A", "B"}));
    s.push_back(typed_key("task.split", KeyType::text, "train", "data split", {"train", "eval"}));
    return s;
}

SyntheticTaskPair diag_task(const Config& c) {
    return stage("task", [&] { return make_task_pair(task_spec(c, c.seed())); });
}

Split split_of(const Config& c) {
    return c.text("task.split") == "train" ? Split::train : Split::eval;
}

const TaskData& which_task(const Config& c, const SyntheticTaskPair& pair) {
    return c.text("task.which") == "A" ? pair.task_A : pair.task_B;
}

void run_diag_fisher(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const ModelParams model = stage("load", [&] { return load_model(c, "model"); });
    const SyntheticTaskPair pair = diag_task(c);
    const std::string layer = c.text("layer").empty() ? model.layers().begin()->first : c.text("layer");
    const auto curve = stage("energy curve", [&] {
        GradientBatch batch{per_sample_gradients(model, which_task(c, pair), split_of(c), layer)};
        const SvdResult svd = svd_full(model.layer(layer), layer);
        std::vector<std::size_t> ranks = c.counts("ranks");
        if (ranks.empty()) {
            ranks.resize(svd.sigma.size());
            std::iota(ranks.begin(), ranks.end(), std::size_t{1});
        }
        return fisher_energy_curve(batch, svd, ranks);
    });
    stage("write outputs", [&] {
        CsvTable t(header, {"r", "x", "y"});
        std::vector<std::pair<std::size_t, double>> pairs;
        for (const auto& p : curve) {
            t.add_row({num(p.r), num(p.x), num(p.y)});
            pairs.emplace_back(p.r, p.y);
        }
        t.write(out / "fisher.csv");
        const EnergyRank er = rank_from_energy(pairs, c.real("energy_target"));
        CsvTable r(header, {"target", "rank", "reached"});
        r.add_row({num(c.real("energy_target")), num(er.rank), er.reached ? "1" : "0"});
        r.write(out / "energy_rank.csv");
        return 0;
    });
}

void run_diag_firstorder(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const ModelParams base = stage("load base", [&] { return load_model(c, "base"); });
    const ModelParams ckpt = stage("load ckpt", [&] { return load_model(c, "ckpt"); });
    const SyntheticTaskPair pair = diag_task(c);
    const auto signals = stage("first-order signal", [&] {
        std::map<std::string, GradientBatch> grads;
        for (const auto& [name, _] : base.layers()) {
            grads[name].samples = per_sample_gradients(base, which_task(c, pair), split_of(c), name);
        }
        return first_order_signal(base.layers(), ckpt.layers(), grads, default_layer_groups(base.layers()));
    });
    stage("write outputs", [&] {
        CsvTable t(header, {"group", "m"});
        for (const auto& s : signals) {
            t.add_row({s.group, num(s.m)});
        }
        t.write(out / "firstorder.csv");
        return 0;
    });
}

void run_diag_rotation(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const ModelParams base = stage("load base", [&] { return load_model(c, "base"); });
    const ModelParams tuned = stage("load tuned", [&] { return load_model(c, "tuned"); });
    const auto types = c.texts("types");
    const std::size_t cap = c.count("cap");
    const RotationReport report = stage("rotation", [&] {
        return rotation_layerwise(base.layers(), tuned.layers(), {types.begin(), types.end()}, cap);
    });
    stage("write outputs", [&] {
        CsvTable t(header, {"layer", "degrees"});
        for (const auto& l : report.layers) {
            t.add_row({l.layer, num(l.degrees)});
        }
        t.write(out / "rotation.csv");
        if (!c.text("layer").empty()) {
            const std::string& layer = c.text("layer");
            std::vector<std::size_t> ranks = c.counts("ranks");
            const DenseMatrix& w = base.layer(layer);
            if (ranks.empty()) {
                ranks.resize(std::min({cap, w.rows(), w.cols()}));
                std::iota(ranks.begin(), ranks.end(), std::size_t{1});
            }
            CsvTable r(header, {"r", "degrees"});
            for (const auto& rr : rotation_rankwise(w, tuned.layer(layer), ranks, cap)) {
                r.add_row({num(rr.r), num(rr.degrees)});
            }
            r.write(out / "rotation_rankwise.csv");
        }
        return 0;
    });
}

void write_drift(const std::vector<std::string>& header, const fs::path& out, const HiddenDrift& d) {
    CsvTable t(header, {"model", "D_hidden", "D_pca", "centroid_x", "centroid_y"});
    for (const auto& m : d.models) {
        t.add_row({m.model, num(m.d_hidden), num(m.d_pca), num(m.centroid_x), num(m.centroid_y)});
    }
    t.write(out / "drift.csv");
    CsvTable p(header, {"sample", "model", "x", "y"});
    for (std::size_t i = 0; i < d.pca_coords.rows(); ++i) {
        p.add_row({num(i), d.sample_models[i], num(d.pca_coords(i, 0)), num(d.pca_coords(i, 1))});
    }
    p.write(out / "drift_pca.csv");
}

void run_diag_drift(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const ModelParams base = stage("load base", [&] { return load_model(c, "base"); });
    std::vector<ModelParams> tuned;
    for (const auto& path : c.texts("tuned")) {
        tuned.push_back(stage("load " + path, [&] { return model_from_tensors(load_checkpoint(path)); }));
    }
    if (tuned.empty()) {
        throw ConfigError("tuned", ConfigError::kResolved, "at least one checkpoint path is required");
    }
    const SyntheticTaskPair pair = diag_task(c);
    const TaskData& task = which_task(c, pair);
    const DenseMatrix& x = split_of(c) == Split::train ? task.x_train : task.x_eval;
    const HiddenDrift d = stage("hidden drift", [&] {
        std::vector<HiddenStateSet> sets{{"base", c.text("task.which"), hidden_states(base, x)}};
        for (std::size_t i = 0; i < tuned.size(); ++i) {
            sets.push_back({"tuned" + std::to_string(i + 1), c.text("task.which"), hidden_states(tuned[i], x)});
        }
        return hidden_drift(sets, "base");
    });
    stage("write outputs", [&] {
        write_drift(header, out, d);
        return 0;
    });
}

std::vector<ProbSequence> model_sequences(const ModelParams& model, const DenseMatrix& x, std::size_t seq_len) {
    const DenseMatrix probs = softmax_rows(forward(model, x));
    std::vector<ProbSequence> seqs;
    for (std::size_t start = 0; start + seq_len <= probs.rows(); start += seq_len) {
        ProbSequence s;
        for (std::size_t t = start; t < start + seq_len; ++t) {
            s.steps.emplace_back(probs.row(t).begin(), probs.row(t).end());
        }
        seqs.push_back(std::move(s));
    }
    return seqs;
}

void run_diag_entropy(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const ModelParams model = stage("load", [&] { return load_model(c, "model"); });
    const SyntheticTaskPair pair = diag_task(c);
    const TaskData& task = which_task(c, pair);
    const DenseMatrix& x = split_of(c) == Split::train ? task.x_train : task.x_eval;
    const std::size_t seq_len = c.count("seq_len");
    const std::size_t cap = c.count("cap");
    const EntropyProfile e = stage("entropy", [&] { return entropy_profile(model_sequences(model, x, seq_len), cap); });
    stage("write outputs", [&] {
        CsvTable t(header, {"sequence_id", "e"});
        for (std::size_t i = 0; i < e.e_values.size(); ++i) {
            t.add_row({num(i), num(e.e_values[i])});
        }
        t.write(out / "entropy.csv");
        CsvTable k(header, {"grid", "density"});
        if (e.kde) {
            for (std::size_t i = 0; i < e.kde->grid.size(); ++i) {
                k.add_row({num(e.kde->grid[i]), num(e.kde->density[i])});
            }
        }
        k.write(out / "entropy_kde.csv");
        return 0;
    });
}

// ---------------------------------------------------------------- presets

Schema pipeline_keys(const std::string& steps, const std::string& target_fraction) {
    Schema s{seed_key()};
    append(s, task_keys());
    append(s, pretrain_keys());
    append(s, finetune_keys(steps, target_fraction));
    return s;
}

void run_fig2(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const Pretrained p = pretrained(c, c.seed());
    CsvTable t(header, {"layer", "r", "x", "y"});
    CsvTable r(header, {"layer", "target", "rank", "reached"});
    for (const auto& [name, w] : p.model0.layers()) {
        const EnergyRankChoice choice =
            stage("energy " + name, [&] { return energy_rank(p.model0, p.pair.task_A, name, c.real("reg.energy_target")); });
        const double R = static_cast<double>(choice.curve.size());
        for (const auto& [rank, y] : choice.curve) {
            t.add_row({name, num(rank), num(static_cast<double>(rank * rank) / (R * R)), num(y)});
        }
        r.add_row({name, num(c.real("reg.energy_target")), num(choice.rank), choice.reached ? "1" : "0"});
    }
    stage("write outputs", [&] {
        t.write(out / "fig2_energy.csv");
        r.write(out / "energy_rank.csv");
        return 0;
    });
}

void run_rank_sweep(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const std::uint64_t seed = c.seed();
    const Pretrained p = pretrained(c, seed);
    std::vector<Arm> arms{{"sft", TrainMode::sft, 0}};
    for (std::size_t k : c.counts("sweep.ranks")) {
        arms.push_back({"rpsft", TrainMode::rpsft, k});
    }
    arms.push_back({"l2_init", TrainMode::l2_init, 0});
    const std::string rot_layer = energy_layer(c, p.model0);
    const SvdResult svd0 = svd_full(p.model0.layer(rot_layer), rot_layer);
    const std::size_t K = std::min(c.count("sweep.rotation_rank"), svd0.sigma.size());
    const double a0 = evaluate(p.model0, p.pair.task_A, Split::eval);

    CsvTable summary(header, {"arm", "k", "steps", "task_b_train", "task_a_increase", "rotation"});
    CsvTable traj(header, {"arm", "k", "step", "task_loss", "total_loss"});
    for (const auto& arm : arms) {
        const ArmResult r = run_arm(c, p, arm, seed);
        const double rot = stage("rotation", [&] {
            return mean_left_rotation(svd0, svd_full(r.result.model.layer(rot_layer), "tuned"), K);
        });
        summary.add_row({arm.name, num(arm.k), num(r.result.trace.records.size()),
                         num(evaluate(r.result.model, p.pair.task_B, Split::train)),
                         num(evaluate(r.result.model, p.pair.task_A, Split::eval) - a0), num(rot)});
        for (const auto& rec : r.result.trace.records) {
            traj.add_row({arm.name, num(arm.k), num(rec.step), num(rec.task_loss), num(rec.total_loss)});
        }
    }
    stage("write outputs", [&] {
        summary.write(out / "rank_sweep.csv");
        traj.write(out / "rank_sweep_trace.csv");
        return 0;
    });
}

struct DriftPoint {
    double lambda;
    LayerStationarity layer;
    double grad_norm;
    std::size_t steps;
};

void run_drift_bound(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const std::size_t m = c.count("quad.rows");
    const std::size_t n = c.count("quad.cols");
    const double h = c.real("quad.curvature");
    Rng rng(Rng::derive(c.seed(), 505));
    const DenseMatrix w0 = rng.gaussian(m, n);
    const DenseMatrix target = w0 + rng.gaussian(m, n, c.real("quad.shift"));
    const BasisSet bases{{"linear.weight", build_basis("linear.weight", w0, c.count("quad.k"))}};
    const ModelParams model0(Architecture::linear, LayerMap{{"linear.weight", w0}});
    std::vector<DriftPoint> points;
    for (double lambda : c.reals("sweep.lambdas")) {
        points.push_back(stage("lambda " + format_number(lambda), [&] {
            const QuadraticObjective objective(LayerMap{{"linear.weight", target}}, h);
            TrainConfig t;
            t.mode = TrainMode::rpsft;
            t.learning_rate = 1.0 / (h + 2.0 * lambda);
            t.steps = c.count("quad.max_steps");
            t.reg.lambda = lambda;
            t.reg.k = c.count("quad.k");
            t.grad_tol = c.real("quad.grad_tol");
            const TrainResult r = train(model0, objective, bases, t);
            const StationarityReport s = stationarity_check(r.model, objective, bases, lambda);
            return DriftPoint{lambda, s.per_layer.at("linear.weight"), s.grad_norm, r.trace.records.size()};
        }));
    }
    double slope = std::nan("");
    if (points.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& p : points) {
            const double x = std::log(p.lambda);
            const double y = std::log(p.layer.drift_lhs);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double np = static_cast<double>(points.size());
        slope = (np * sxy - sx * sy) / (np * sxx - sx * sx);
    }
    stage("write outputs", [&] {
        CsvTable t(header, {"lambda", "drift_lhs", "bound_rhs", "stationary_residual", "grad_norm", "steps"});
        for (const auto& p : points) {
            t.add_row({num(p.lambda), num(p.layer.drift_lhs), p.layer.bound_rhs ? num(*p.layer.bound_rhs) : "nan",
                       num(p.layer.stationary_residual), num(p.grad_norm), num(p.steps)});
        }
        t.write(out / "drift_bound.csv");
        CsvTable s(header, {"metric", "value"});
        s.add_row({"loglog_slope", num(slope)});
        s.write(out / "drift_slope.csv");
        return 0;
    });
}

void run_forgetting_preset(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const ForgettingConfig f = stage("config", [&] { return forgetting_config(c); });
    const std::size_t seeds = c.count("sweep.seeds");
    CsvTable t(header, {"seed", "k", "target_loss", "matched", "sft_steps", "sft_task_b", "sft_task_a_increase",
                        "sft_rotation", "rpsft_steps", "rpsft_task_b", "rpsft_task_a_increase", "rpsft_rotation"});
    std::size_t matched = 0;
    std::size_t lower_rotation = 0;
    std::size_t less_forgetting = 0;
    for (std::size_t i = 0; i < seeds; ++i) {
        const std::uint64_t seed = c.seed() + i;
        const ForgettingRun r = stage("seed " + std::to_string(seed), [&] { return run_forgetting(f, seed); });
        matched += r.matched ? 1 : 0;
        lower_rotation += r.rpsft.rotation < r.sft.rotation ? 1 : 0;
        less_forgetting += r.rpsft.task_a_increase <= r.sft.task_a_increase ? 1 : 0;
        t.add_row({num(static_cast<std::size_t>(seed)), num(r.k), num(r.target_loss), r.matched ? "1" : "0",
                   num(r.sft.steps), num(r.sft.task_b_loss), num(r.sft.task_a_increase), num(r.sft.rotation),
                   num(r.rpsft.steps), num(r.rpsft.task_b_loss), num(r.rpsft.task_a_increase), num(r.rpsft.rotation)});
    }
    stage("write outputs", [&] {
        t.write(out / "forgetting.csv");
        CsvTable s(header, {"metric", "value"});
        s.add_row({"seeds", num(seeds)});
        s.add_row({"matched", num(matched)});
        s.add_row({"rpsft_lower_rotation", num(lower_rotation)});
        s.add_row({"rpsft_less_or_equal_forgetting", num(less_forgetting)});
        s.write(out / "forgetting_summary.csv");
        return 0;
    });
}

void run_rotation_preset(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const std::uint64_t seed = c.seed();
    const Pretrained p = pretrained(c, seed);
    const std::size_t k = resolve_rank(c, p);
    CsvTable layerwise(header, {"arm", "layer", "degrees"});
    CsvTable rankwise(header, {"arm", "layer", "r", "degrees"});
    for (const Arm& arm : {Arm{"sft", TrainMode::sft, 0}, Arm{"rpsft", TrainMode::rpsft, k}}) {
        const ArmResult r = run_arm(c, p, arm, seed);
        const RotationReport rep = stage("rotation " + arm.name, [&] {
            return rotation_layerwise(p.model0.layers(), r.result.model.layers(), {"weight"}, c.count("cap"));
        });
        for (const auto& l : rep.layers) {
            layerwise.add_row({arm.name, l.layer, num(l.degrees)});
        }
        for (const auto& [name, w] : p.model0.layers()) {
            std::vector<std::size_t> ranks(std::min({c.count("cap"), w.rows(), w.cols()}));
            std::iota(ranks.begin(), ranks.end(), std::size_t{1});
            for (const auto& rr : rotation_rankwise(w, r.result.model.layer(name), ranks, c.count("cap"))) {
                rankwise.add_row({arm.name, name, num(rr.r), num(rr.degrees)});
            }
        }
    }
    stage("write outputs", [&] {
        layerwise.write(out / "rotation.csv");
        rankwise.write(out / "rotation_rankwise.csv");
        return 0;
    });
}

void run_hidden_drift_preset(const Config& c, const fs::path& out, const std::vector<std::string>& header) {
    const std::uint64_t seed = c.seed();
    const Pretrained p = pretrained(c, seed);
    const std::size_t k = resolve_rank(c, p);
    const TaskData& task = task_of(p, c.text("task.which"));
    std::vector<HiddenStateSet> sets{{"base", c.text("task.which"), hidden_states(p.model0, task.x_eval)}};
    for (const Arm& arm : {Arm{"sft", TrainMode::sft, 0}, Arm{"rpsft", TrainMode::rpsft, k}}) {
        const ArmResult r = run_arm(c, p, arm, seed);
        sets.push_back({arm.name, c.text("task.which"), hidden_states(r.result.model, task.x_eval)});
    }
    const HiddenDrift d = stage("hidden drift", [&] { return hidden_drift(sets, "base"); });
    stage("write outputs", [&] {
        write_drift(header, out, d);
        return 0;
    });
}

using BodyRunner = void (*)(const Config&, const fs::path&, const std::vector<std::string>&);

CommandSpec make_spec(std::string name, std::string summary, Schema schema, BodyRunner body) {
    CommandSpec spec;
    spec.name = std::move(name);
    spec.summary = std::move(summary);
    spec.schema = std::move(schema);
    const std::string n = spec.name;
    const Schema sch = spec.schema;
    spec.run = [n, sch, body](const Config& c, const fs::path& out) {
        CommandSpec self{n, "", sch, {}};
        body(c, out, output_header(self, c));
    };
    return spec;
}

std::string names_of(const std::vector<CommandSpec>& specs) {
    std::string s;
    for (const auto& spec : specs) {
        s += (s.empty() ? "" : ", ") + spec.name;
    }
    return s;
}

} // namespace

ForgettingConfig forgetting_config(const Config& c) {
    ForgettingConfig f;
    f.task = task_spec(c, 0);
    f.hidden_dim = c.count("task.hidden_dim");
    f.pretrain = pretrain_config(c, 0);
    f.finetune = finetune_config(c, TrainMode::rpsft, 0, 0);
    f.lambda = c.real("reg.lambda");
    f.energy_target = c.real("reg.energy_target");
    f.energy_layer = c.text("reg.energy_layer").empty() ? "hidden.weight" : c.text("reg.energy_layer");
    f.rotation_layer = f.energy_layer;
    f.target_fraction = c.real("finetune.target_fraction");
    if (c.text("arch") != "two_layer_tanh") {
        throw ConfigError("arch", ConfigError::kResolved, "the forgetting trade-off runs on two_layer_tanh");
    }
    if (!(f.target_fraction > 0.0)) {
        throw ConfigError("finetune.target_fraction", ConfigError::kResolved, "matched-loss stopping needs a positive target");
    }
    return f;
}

const std::vector<CommandSpec>& command_specs() {
    static const std::vector<CommandSpec> specs = [] {
        std::vector<CommandSpec> v;

        Schema train{seed_key()};
        TaskDefaults linear;
        linear.arch = "linear";
        linear.input_dim = "16";
        linear.output_dim = "16";
        linear.rotation_angle = "30";
        linear.a_dominant_dims = "0";
        linear.a_background_std = "1";
        append(train, task_keys(linear));
        append(train, pretrain_keys());
        append(train, finetune_keys("500", "0"));
        train.push_back(typed_key("train.mode", KeyType::text, "rpsft", "fine-tuning objective",
                                  {"sft", "rpsft", "l2_init"}));
        v.push_back(make_spec("train", "pretrain on task A, fine-tune on task B, write trace and checkpoints",
                              std::move(train), run_train));

        v.push_back(make_spec("gradflow", "integrate the regularized gradient flow and check the closed form",
                              flow_keys("constant"), run_gradflow));
        v.push_back(make_spec("rankselect", "rank-selection curves for a seeded coordinate profile", rank_keys(),
                              run_rankselect));

        Schema fisher = diag_task_keys();
        fisher.push_back(typed_key("model", KeyType::text, "", "model checkpoint"));
        fisher.push_back(typed_key("layer", KeyType::text, "", "layer (empty: first)"));
        fisher.push_back(typed_key("ranks", KeyType::integer_list, "", "ranks to evaluate (empty: all)"));
        fisher.push_back(real_key("energy_target", "0.2", "energy fraction for the rank rule", 0.0, true, 1.0));
        v.push_back(make_spec("diag fisher", "Fisher-projected gradient energy curve", std::move(fisher),
                              run_diag_fisher));

        Schema first = diag_task_keys();
        first.push_back(typed_key("base", KeyType::text, "", "base checkpoint"));
        first.push_back(typed_key("ckpt", KeyType::text, "", "fine-tuned checkpoint"));
        v.push_back(make_spec("diag firstorder", "first-order signal per layer group", std::move(first),
                              run_diag_firstorder));

        Schema rot{seed_key()};
        rot.push_back(typed_key("base", KeyType::text, "", "base checkpoint"));
        rot.push_back(typed_key("tuned", KeyType::text, "", "fine-tuned checkpoint"));
        rot.push_back(typed_key("types", KeyType::text_list, "weight", "matrix types to compare"));
        rot.push_back(int_key("cap", "512", "maximum subspace dimension", 1));
        rot.push_back(typed_key("layer", KeyType::text, "", "matrix for the rankwise curve (empty: skip)"));
        rot.push_back(typed_key("ranks", KeyType::integer_list, "", "ranks for the rankwise curve (empty: all)"));
        v.push_back(make_spec("diag rotation", "U-space rotation, layerwise and rankwise", std::move(rot),
                              run_diag_rotation));

        Schema drift = diag_task_keys();
        drift.push_back(typed_key("base", KeyType::text, "", "base checkpoint"));
        drift.push_back(typed_key("tuned", KeyType::text_list, "", "fine-tuned checkpoints"));
        v.push_back(make_spec("diag drift", "hidden-state centroid drift and PCA coordinates", std::move(drift),
                              run_diag_drift));

        Schema entropy = diag_task_keys();
        entropy.push_back(typed_key("model", KeyType::text, "", "model checkpoint"));
        entropy.push_back(int_key("seq_len", "8", "consecutive samples per sequence", 1));
        entropy.push_back(int_key("cap", "128", "maximum sequence length", 1));
        v.push_back(make_spec("diag entropy", "per-sequence output entropy and its KDE", std::move(entropy),
                              run_diag_entropy));
        return v;
    }();
    return specs;
}

const std::vector<CommandSpec>& preset_specs() {
    static const std::vector<CommandSpec> specs = [] {
        std::vector<CommandSpec> v;
        Schema fig2 = pipeline_keys("2000", "0.5");
        v.push_back(make_spec("fig2-energy", "gradient energy captured by the top r x r singular block",
                              std::move(fig2), run_fig2));

        Schema sweep = pipeline_keys("300", "0");
        sweep.push_back(typed_key("sweep.ranks", KeyType::integer_list, "0,1,2,4,8,16", "protected ranks"));
        sweep.push_back(int_key("sweep.rotation_rank", "4", "subspace size for the rotation column", 1));
        v.push_back(make_spec("rank-sweep", "fine-tune across protected ranks against sft and l2_init",
                              std::move(sweep), run_rank_sweep));

        Schema drift{seed_key()};
        drift.push_back(int_key("quad.rows", "12", "weight rows", 1));
        drift.push_back(int_key("quad.cols", "10", "weight columns", 1));
        drift.push_back(int_key("quad.k", "3", "protected rank", 1));
        drift.push_back(real_key("quad.curvature", "0.1", "curvature of the quadratic task", 0.0, true));
        drift.push_back(real_key("quad.shift", "1", "scale of the target offset from W0", 0.0, true));
        drift.push_back(int_key("quad.max_steps", "20000", "gradient steps per lambda", 1));
        drift.push_back(real_key("quad.grad_tol", "1e-11", "stop once the gradient norm is below this", 0.0));
        drift.push_back(typed_key("sweep.lambdas", KeyType::real_list, "0.5,1,2,4,8", "penalty strengths"));
        v.push_back(make_spec("drift-bound", "protected drift against its gradient bound across lambda",
                              std::move(drift), run_drift_bound));

        v.push_back(make_spec("gradflow", "flow closed form and Volterra residual for every forcing",
                              flow_keys("constant"), run_gradflow_preset));

        Schema forget = pipeline_keys("5000", "0.5");
        forget.push_back(int_key("sweep.seeds", "20", "number of consecutive seeds", 1));
        v.push_back(make_spec("forgetting-tradeoff", "sft vs rpsft forgetting at matched task-B loss",
                              std::move(forget), run_forgetting_preset));

        Schema rot = pipeline_keys("5000", "0.5");
        rot.push_back(int_key("cap", "512", "maximum subspace dimension", 1));
        v.push_back(make_spec("rotation", "U-space rotation of sft and rpsft fine-tunes", std::move(rot),
                              run_rotation_preset));

        Schema hd = pipeline_keys("5000", "0.5");
        hd.push_back(typed_key("task.which", KeyType::text, "A", "task whose eval inputs are embedded", {"A", "B"}));
        v.push_back(make_spec("hidden-drift", "hidden-state drift of sft and rpsft fine-tunes", std::move(hd),
                              run_hidden_drift_preset));
        return v;
    }();
    return specs;
}

const CommandSpec& find_command(std::string_view name) {
    for (const auto& s : command_specs()) {
        if (s.name == name) {
            return s;
        }
    }
    throw ParameterError("unknown command '" + std::string(name) + "'; valid commands: " + names_of(command_specs()));
}

const CommandSpec& find_preset(std::string_view name) {
    for (const auto& s : preset_specs()) {
        if (s.name == name) {
            return s;
        }
    }
    throw ParameterError("unknown preset '" + std::string(name) + "'; valid presets: " + names_of(preset_specs()));
}

std::vector<std::string> output_header(const CommandSpec& spec, const Config& config) {
    std::vector<std::string> h{"rpsft " + spec.name};
    for (const auto& line : config.lines()) {
        h.push_back(line);
    }
    return h;
}

void run_command(const CommandSpec& spec, const Config& config, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    }
    const auto start = std::chrono::steady_clock::now();
    spec.run(config, out_dir);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string manifest = "# rpsft " + spec.name + "\n# wall_time_seconds = " + format_number(wall) + "\n";
    for (const auto& line : config.lines()) {
        manifest += line + "\n";
    }
    write_text_file(out_dir / "manifest.txt", manifest);
}

} // namespace rpsft
