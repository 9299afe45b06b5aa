#include "rpsft/toy_trainer.hpp"

#include "rpsft/diagnostics.hpp"
#include "rpsft/error.hpp"
#include "rpsft/linalg.hpp"
#include "rpsft/rank_select.hpp"
#include "rpsft/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace rpsft {

namespace {

enum StreamTag : std::uint64_t {
    kTeacherStream = 1,
    kPlaneStream,
    kInputBasisStream,
    kTaskATrainStream,
    kTaskAEvalStream,
    kTaskBTrainStream,
    kTaskBEvalStream,
    kShuffleStream,
    kInitStream,
    kPretrainStream,
    kFinetuneStream,
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

// exact values at multiples of 90 degrees so half and quarter turns are exact
std::pair<double, double> cos_sin_degrees(double degrees) {
    const double turns = degrees / 90.0;
    if (turns == std::floor(turns) && std::abs(turns) < 1e15) {
        const long long q = static_cast<long long>(turns) % 4;
        switch ((q + 4) % 4) {
        case 0:
            return {1.0, 0.0};
        case 1:
            return {0.0, 1.0};
        case 2:
            return {-1.0, 0.0};
        default:
            return {0.0, -1.0};
        }
    }
    const double rad = degrees * std::numbers::pi / 180.0;
    return {std::cos(rad), std::sin(rad)};
}

// R = I + (c - 1)(p pᵀ + q qᵀ) + s (q pᵀ - p qᵀ), rotating p toward q
DenseMatrix planar_rotation(std::size_t dim, const std::vector<double>& p, const std::vector<double>& q, double c,
                            double s) {
    DenseMatrix r = DenseMatrix::identity(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            r(i, j) += (c - 1.0) * (p[i] * p[j] + q[i] * q[j]) + s * (q[i] * p[j] - p[i] * q[j]);
        }
    }
    return r;
}

DenseMatrix targets(const DenseMatrix& x, const DenseMatrix& teacher, double noise_std, Rng& rng) {
    DenseMatrix y = matmul_nt(x, teacher);
    if (noise_std > 0.0) {
        y += rng.gaussian(y.rows(), y.cols(), noise_std);
    }
    return y;
}

DenseMatrix select_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
    DenseMatrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

bool all_finite(const LayerMap& layers) {
    return std::all_of(layers.begin(), layers.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

} // namespace

SyntheticTaskPair make_task_pair(const TaskPairSpec& spec) {
    if (spec.input_dim == 0 || spec.output_dim == 0 || spec.n_train == 0 || spec.n_eval == 0) {
        throw ParameterError("task dimensions and sample counts must be positive");
    }
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
        throw ParameterError("noise_std must be a finite value >= 0");
    }
    if (!std::isfinite(spec.rotation_angle)) {
        throw ParameterError("rotation_angle must be finite");
    }
    if (spec.a_dominant_dims > spec.input_dim) {
        throw ParameterError("a_dominant_dims exceeds input_dim");
    }
    if (!(spec.a_background_std >= 0.0)) {
        throw ParameterError("a_background_std must be >= 0");
    }
    const auto [c, s] = cos_sin_degrees(spec.rotation_angle);
    if (spec.output_dim < 2 && !(c == 1.0 && s == 0.0)) {
        throw ParameterError("a nonzero rotation needs output_dim >= 2");
    }

    SyntheticTaskPair pair;
    pair.spec = spec;
    const std::size_t in = spec.input_dim;
    const std::size_t out = spec.output_dim;

    Rng teacher_rng(Rng::derive(spec.seed, kTeacherStream));
    pair.teacher_A = teacher_rng.gaussian(out, in, 1.0 / std::sqrt(static_cast<double>(in)));
    if (out == in) {
        pair.teacher_A = orthonormalize_columns(pair.teacher_A);
    }

    if (c == 1.0 && s == 0.0) {
        pair.teacher_B = pair.teacher_A;
    } else {
        std::vector<double> p(out, 0.0);
        std::vector<double> q(out, 0.0);
        if (out == 2) {
            p[0] = 1.0;
            q[1] = 1.0;
        } else {
            Rng plane_rng(Rng::derive(spec.seed, kPlaneStream));
            const DenseMatrix pq = orthonormalize_columns(plane_rng.gaussian(out, 2));
            for (std::size_t i = 0; i < out; ++i) {
                p[i] = pq(i, 0);
                q[i] = pq(i, 1);
            }
        }
        pair.teacher_B = matmul(planar_rotation(out, p, q, c, s), pair.teacher_A);
    }

    // task-A inputs: x = Q diag(scale) z with Q a seeded orthogonal matrix
    DenseMatrix mixing;
    if (spec.a_dominant_dims > 0) {
        Rng basis_rng(Rng::derive(spec.seed, kInputBasisStream));
        mixing = orthonormalize_columns(basis_rng.gaussian(in, in));
        for (std::size_t j = spec.a_dominant_dims; j < in; ++j) {
            for (std::size_t i = 0; i < in; ++i) {
                mixing(i, j) *= spec.a_background_std;
            }
        }
    }
    auto inputs_a = [&](Rng& rng, std::size_t n) {
        DenseMatrix z = rng.gaussian(n, in);
        return mixing.empty() ? z : matmul_nt(z, mixing);
    };

    Rng a_train(Rng::derive(spec.seed, kTaskATrainStream));
    pair.task_A.x_train = inputs_a(a_train, spec.n_train);
    pair.task_A.y_train = targets(pair.task_A.x_train, pair.teacher_A, spec.noise_std, a_train);
    Rng a_eval(Rng::derive(spec.seed, kTaskAEvalStream));
    pair.task_A.x_eval = inputs_a(a_eval, spec.n_eval);
    pair.task_A.y_eval = targets(pair.task_A.x_eval, pair.teacher_A, spec.noise_std, a_eval);

    Rng b_train(Rng::derive(spec.seed, kTaskBTrainStream));
    pair.task_B.x_train = b_train.gaussian(spec.n_train, in);
    pair.task_B.y_train = targets(pair.task_B.x_train, pair.teacher_B, spec.noise_std, b_train);
    Rng b_eval(Rng::derive(spec.seed, kTaskBEvalStream));
    pair.task_B.x_eval = b_eval.gaussian(spec.n_eval, in);
    pair.task_B.y_eval = targets(pair.task_B.x_eval, pair.teacher_B, spec.noise_std, b_eval);
    return pair;
}

SupervisedObjective::SupervisedObjective(const DenseMatrix& x, const DenseMatrix& y) : x_(x), y_(y) {
    if (x_.empty() || y_.empty() || x_.rows() != y_.rows()) {
        throw ParameterError("inputs and targets must be non-empty with equal sample counts");
    }
}

SupervisedObjective::SupervisedObjective(const TaskData& task, Split split)
    : SupervisedObjective(split == Split::train ? task.x_train : task.x_eval,
                          split == Split::train ? task.y_train : task.y_eval) {}

double SupervisedObjective::evaluate(const ModelParams& model, std::span<const std::size_t> rows,
                                     LayerMap* grad) const {
    const DenseMatrix* xp = &x_;
    const DenseMatrix* yp = &y_;
    DenseMatrix xb;
    DenseMatrix yb;
    if (!rows.empty()) {
        xb = select_rows(x_, rows);
        yb = select_rows(y_, rows);
        xp = &xb;
        yp = &yb;
    }
    const DenseMatrix& x = *xp;
    const DenseMatrix& y = *yp;
    const auto n = static_cast<double>(x.rows());
    if (y.cols() != model.output_dim()) {
        throw ParameterError("targets have " + std::to_string(y.cols()) + " columns, model outputs " +
                             std::to_string(model.output_dim()));
    }

    if (model.architecture() == Architecture::linear_softmax_classifier) {
        const DenseMatrix logits = forward(model, x);
        DenseMatrix p = softmax_rows(logits);
        double loss = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            const auto yrow = y.row(i);
            const auto label =
                static_cast<std::size_t>(std::max_element(yrow.begin(), yrow.end()) - yrow.begin());
            const auto lrow = logits.row(i);
            const double top = *std::max_element(lrow.begin(), lrow.end());
            double z = 0.0;
            for (double v : lrow) {
                z += std::exp(v - top);
            }
            loss += top + std::log(z) - lrow[label];
            p(i, label) -= 1.0;
        }
        if (grad != nullptr) {
            p *= 1.0 / n;
            (*grad)["classifier.weight"] = matmul_tn(p, x);
        }
        return loss / n;
    }

    const double scale = 1.0 / (n * static_cast<double>(y.cols()));
    if (model.architecture() == Architecture::linear) {
        DenseMatrix r = forward(model, x);
        r -= y;
        const double loss = squared_norm(r) * scale;
        if (grad != nullptr) {
            r *= 2.0 * scale;
            (*grad)["linear.weight"] = matmul_tn(r, x);
        }
        return loss;
    }

    const DenseMatrix& w2 = model.layer("output.weight");
    const DenseMatrix hidden = hidden_states(model, x);
    DenseMatrix r = matmul_nt(hidden, w2);
    r -= y;
    const double loss = squared_norm(r) * scale;
    if (grad != nullptr) {
        r *= 2.0 * scale;
        DenseMatrix dz = matmul(r, w2);
        for (std::size_t i = 0; i < dz.rows(); ++i) {
            for (std::size_t j = 0; j < dz.cols(); ++j) {
                const double a = hidden(i, j);
                dz(i, j) *= 1.0 - a * a;
            }
        }
        (*grad)["output.weight"] = matmul_tn(r, hidden);
        (*grad)["hidden.weight"] = matmul_tn(dz, x);
    }
    return loss;
}

QuadraticObjective::QuadraticObjective(LayerMap targets, LayerMap curvature)
    : targets_(std::move(targets)), curvature_(std::move(curvature)) {
    if (targets_.empty() || targets_.size() != curvature_.size()) {
        throw ParameterError("quadratic objective needs one curvature matrix per target");
    }
    for (const auto& [name, t] : targets_) {
        auto it = curvature_.find(name);
        if (it == curvature_.end() || !it->second.same_shape(t)) {
            throw ParameterError("curvature for " + name + " missing or misshaped");
        }
        for (double h : it->second.data()) {
            if (!(h > 0.0) || !std::isfinite(h)) {
                throw ParameterError("curvature for " + name + " must be positive and finite");
            }
        }
    }
}

QuadraticObjective::QuadraticObjective(LayerMap targets, double h)
    : QuadraticObjective(targets, [&] {
          LayerMap c;
          for (const auto& [name, t] : targets) {
              c.emplace(name, DenseMatrix(t.rows(), t.cols(), h));
          }
          return c;
      }()) {}

double QuadraticObjective::evaluate(const ModelParams& model, std::span<const std::size_t>, LayerMap* grad) const {
    double loss = 0.0;
    for (const auto& [name, target] : targets_) {
        const DenseMatrix& w = model.layer(name);
        require_same_shape(w, target, "quadratic objective layer " + name);
        const DenseMatrix& h = curvature_.at(name);
        DenseMatrix g(w.rows(), w.cols());
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double d = w.data()[i] - target.data()[i];
            loss += 0.5 * h.data()[i] * d * d;
            g.data()[i] = h.data()[i] * d;
        }
        if (grad != nullptr) {
            (*grad)[name] = std::move(g);
        }
    }
    return loss;
}

std::string_view to_string(TrainMode mode) {
    switch (mode) {
    case TrainMode::sft:
        return "sft";
    case TrainMode::rpsft:
        return "rpsft";
    case TrainMode::l2_init:
        return "l2_init";
    }
    return "unknown";
}

TrainMode parse_train_mode(std::string_view name) {
    for (auto m : {TrainMode::sft, TrainMode::rpsft, TrainMode::l2_init}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    throw ParameterError("unknown training mode '" + std::string(name) + "' (expected sft, rpsft or l2_init)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ParameterError("learning rate must be positive and finite");
    }
    if (steps < 1) {
        throw ParameterError("steps must be >= 1");
    }
    if (batch_size < 1) {
        throw ParameterError("batch size must be >= 1");
    }
    if (!(grad_tol >= 0.0)) {
        throw ParameterError("grad_tol must be >= 0");
    }
    reg.validate();
}

BasisSet bases_for(const ModelParams& model0, const TrainConfig& config) {
    switch (config.mode) {
    case TrainMode::sft:
        return {};
    case TrainMode::rpsft:
        return build_bases(model0.layers(), config.reg);
    case TrainMode::l2_init:
        config.reg.validate();
        return build_bases(model0.layers(), config.reg.layer_selector, kFullRank);
    }
    return {};
}

TrainResult train(const ModelParams& model0, const Objective& objective, const BasisSet& bases,
                  const TrainConfig& config) {
    config.validate();
    for (const auto& [name, basis] : bases) {
        const DenseMatrix& w = model0.layer(name);
        if (w.rows() != basis.rows() || w.cols() != basis.cols()) {
            throw ParameterError("basis for " + name + " does not match the layer shape");
        }
    }
    const double lambda = config.reg.lambda;
    const std::size_t period = config.reg.update_period;
    const bool penalized = config.mode != TrainMode::sft && lambda > 0.0 && !bases.empty();

    TrainResult result{model0, {}, false};
    ModelParams& model = result.model;
    TrainTrace& trace = result.trace;
    for (const auto& [name, _] : bases) {
        trace.drift_layers.push_back(name);
    }
    for (const auto& [name, _] : model0.layers()) {
        trace.grad_layers.push_back(name);
    }
    trace.records.reserve(config.steps);

    const std::size_t n = objective.sample_count();
    const bool full_batch = n == 0 || config.batch_size >= n;
    Rng shuffle(Rng::derive(config.seed, kShuffleStream));
    std::vector<std::size_t> order;
    std::size_t cursor = 0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        std::span<const std::size_t> rows;
        if (!full_batch) {
            if (order.empty() || cursor + config.batch_size > n) {
                order = shuffle.permutation(n);
                cursor = 0;
            }
            rows = std::span<const std::size_t>(order.data() + cursor, config.batch_size);
            cursor += config.batch_size;
        }

        LayerMap grad;
        TraceRecord rec;
        rec.step = step;
        rec.task_loss = objective.evaluate(model, rows, &grad);
        if (!std::isfinite(rec.task_loss)) {
            throw TrainingError("non-finite task loss at step " + std::to_string(step), step);
        }

        const bool apply_penalty = penalized && step % period == 0;
        for (const auto& [name, basis] : bases) {
            const DenseMatrix& w = model.layer(name);
            DenseMatrix d = protected_drift(w, basis);
            const double d2 = squared_norm(d);
            rec.drift.push_back(std::sqrt(d2));
            if (apply_penalty) {
                rec.penalty += d2;
                d *= 2.0 * lambda;
                grad.at(name) += matmul_nt(matmul(basis.U_k().columns(), d), basis.V_k().columns());
            }
        }
        rec.total_loss = apply_penalty ? rec.task_loss + lambda * rec.penalty : rec.task_loss;
        if (!std::isfinite(rec.total_loss) || !all_finite(grad)) {
            throw TrainingError("non-finite loss or gradient at step " + std::to_string(step), step);
        }

        double total_grad2 = 0.0;
        for (const auto& [name, g] : grad) {
            const double g2 = squared_norm(g);
            rec.grad_norm.push_back(std::sqrt(g2));
            total_grad2 += g2;
        }
        const bool reached_loss = config.stop_loss && rec.task_loss <= *config.stop_loss;
        const bool reached_grad = config.grad_tol > 0.0 && std::sqrt(total_grad2) < config.grad_tol;
        trace.records.push_back(std::move(rec));
        if (reached_loss || reached_grad) {
            result.stopped_early = true;
            break;
        }
        for (auto& [name, g] : grad) {
            model.layer(name).add_scaled(g, -config.learning_rate);
        }
    }
    return result;
}

TrainResult train_rpsft(const ModelParams& model0, const TaskData& task_B, const BasisSet& bases,
                        const TrainConfig& config) {
    const SupervisedObjective objective(task_B, Split::train);
    return train(model0, objective, bases, config);
}

ModelParams pretrain(Architecture arch, const TaskData& task_A, const PretrainConfig& config) {
    config.train.validate();
    if (config.train.mode != TrainMode::sft) {
        throw ParameterError("pretraining runs in sft mode");
    }
    const std::size_t in = task_A.x_train.cols();
    const std::size_t out = task_A.y_train.cols();
    ModelParams init = init_model(arch, in, out, config.hidden_dim, Rng::derive(config.train.seed, kInitStream),
                                  config.init_scale);
    TrainResult r = train_rpsft(init, task_A, {}, config.train);
    const double loss = evaluate(r.model, task_A, Split::eval);
    if (!(loss <= config.loss_threshold)) {
        throw TrainingError("pretraining reached eval loss " + fmt(loss) + ", above the threshold " +
                                fmt(config.loss_threshold),
                            r.trace.records.size());
    }
    return std::move(r.model);
}

double evaluate(const ModelParams& model, const TaskData& task, Split split) {
    return SupervisedObjective(task, split).evaluate(model, {}, nullptr);
}

StationarityReport stationarity_check(const ModelParams& model, const Objective& objective, const BasisSet& bases,
                                      double lambda) {
    if (!(lambda >= 0.0)) {
        throw ParameterError("lambda must be >= 0");
    }
    LayerMap grad;
    objective.evaluate(model, {}, &grad);
    StationarityReport report;
    double total = 0.0;
    for (const auto& [name, g] : grad) {
        DenseMatrix full = g;
        auto it = bases.find(name);
        if (it != bases.end()) {
            const ProtectedBasis& basis = it->second;
            const DenseMatrix d = protected_drift(model.layer(name), basis);
            DenseMatrix projected = matmul(matmul_tn(basis.U_k().columns(), g), basis.V_k().columns());
            projected.add_scaled(d, 2.0 * lambda);
            LayerStationarity ls;
            ls.drift_lhs = frobenius_norm(d);
            ls.task_grad_norm = frobenius_norm(g);
            if (lambda > 0.0) {
                ls.bound_rhs = ls.task_grad_norm / (2.0 * lambda);
            }
            ls.stationary_residual = frobenius_norm(projected);
            report.per_layer.emplace(name, ls);
            full.add_scaled(penalty_gradient(model.layer(name), basis), lambda);
        }
        total += squared_norm(full);
    }
    report.grad_norm = std::sqrt(total);
    return report;
}

std::vector<DenseMatrix> per_sample_gradients(const ModelParams& model, const TaskData& task, Split split,
                                              const std::string& layer) {
    model.layer(layer);
    const SupervisedObjective objective(task, split);
    std::vector<DenseMatrix> out;
    out.reserve(objective.sample_count());
    for (std::size_t i = 0; i < objective.sample_count(); ++i) {
        LayerMap grad;
        const std::size_t row[1] = {i};
        objective.evaluate(model, row, &grad);
        out.push_back(std::move(grad.at(layer)));
    }
    return out;
}

EnergyRankChoice energy_rank(const ModelParams& model, const TaskData& task, const std::string& layer,
                             double target_fraction) {
    const DenseMatrix& w = model.layer(layer);
    GradientBatch batch{per_sample_gradients(model, task, Split::train, layer)};
    const SvdResult svd = svd_full(w, layer);
    std::vector<std::size_t> ranks(svd.sigma.size());
    std::iota(ranks.begin(), ranks.end(), std::size_t{1});
    EnergyRankChoice choice;
    for (const auto& p : fisher_energy_curve(batch, svd, ranks)) {
        choice.curve.emplace_back(p.r, p.y);
    }
    const EnergyRank er = rank_from_energy(choice.curve, target_fraction);
    choice.rank = er.rank;
    choice.reached = er.reached;
    return choice;
}

ForgettingRun run_forgetting(const ForgettingConfig& config, std::uint64_t seed) {
    TaskPairSpec spec = config.task;
    spec.seed = seed;
    const SyntheticTaskPair pair = make_task_pair(spec);

    PretrainConfig pre = config.pretrain;
    pre.hidden_dim = config.hidden_dim;
    pre.train.mode = TrainMode::sft;
    pre.train.seed = Rng::derive(seed, kPretrainStream);
    const ModelParams model0 = pretrain(Architecture::two_layer_tanh, pair.task_A, pre);

    ForgettingRun run;
    run.seed = seed;
    run.k = energy_rank(model0, pair.task_A, config.energy_layer, config.energy_target).rank;
    run.target_loss = config.target_fraction * evaluate(model0, pair.task_B, Split::train);
    const double a0 = evaluate(model0, pair.task_A, Split::eval);
    const DenseMatrix& w_rot = model0.layer(config.rotation_layer);
    const std::size_t K = std::min({run.k, w_rot.rows(), w_rot.cols()});
    const SvdResult svd0 = svd_full(w_rot, config.rotation_layer);

    bool both_reached = true;
    auto arm = [&](TrainMode mode) {
        TrainConfig cfg = config.finetune;
        cfg.mode = mode;
        cfg.seed = Rng::derive(seed, kFinetuneStream);
        cfg.reg.lambda = mode == TrainMode::sft ? 0.0 : config.lambda;
        cfg.reg.k = mode == TrainMode::sft ? 0 : run.k;
        cfg.stop_loss = run.target_loss;
        BasisSet bases;
        if (mode != TrainMode::sft) {
            // the rank comes from one layer; narrower layers protect all they have
            for (const auto& [name, w] : model0.layers()) {
                if (cfg.reg.selects(name)) {
                    bases.emplace(name, build_basis(name, w, std::min({run.k, w.rows(), w.cols()})));
                }
            }
        }
        const TrainResult r = train_rpsft(model0, pair.task_B, bases, cfg);
        both_reached = both_reached && r.stopped_early;
        ForgettingArm out;
        out.steps = r.trace.records.size();
        out.task_b_loss = evaluate(r.model, pair.task_B, Split::train);
        out.task_a_increase = evaluate(r.model, pair.task_A, Split::eval) - a0;
        out.rotation = mean_left_rotation(svd0, svd_full(r.model.layer(config.rotation_layer), "tuned"), K);
        return out;
    };
    run.sft = arm(TrainMode::sft);
    run.rpsft = arm(TrainMode::rpsft);
    const double scale = std::max(run.sft.task_b_loss, run.rpsft.task_b_loss);
    run.matched = both_reached && std::abs(run.sft.task_b_loss - run.rpsft.task_b_loss) <= 0.05 * scale;
    return run;
}

} // namespace rpsft
