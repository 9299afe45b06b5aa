#include "rpsft/error.hpp"
#include "rpsft/linalg.hpp"
#include "rpsft/rng.hpp"
#include "rpsft/toy_trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rpsft;

namespace {

SyntheticTaskPair small_pair(double angle = 30.0, std::uint64_t seed = 3) {
    TaskPairSpec s;
    s.input_dim = 6;
    s.output_dim = 5;
    s.n_train = 64;
    s.n_eval = 32;
    s.rotation_angle = angle;
    s.seed = seed;
    return make_task_pair(s);
}

TrainConfig quick(TrainMode mode, std::size_t k, std::size_t steps = 50) {
    TrainConfig t;
    t.mode = mode;
    t.steps = steps;
    t.reg.k = k;
    t.learning_rate = 0.1;
    t.batch_size = 16;
    t.seed = 9;
    return t;
}

bool same_trace(const TrainTrace& a, const TrainTrace& b) {
    if (a.records.size() != b.records.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto& x = a.records[i];
        const auto& y = b.records[i];
        if (x.task_loss != y.task_loss || x.total_loss != y.total_loss || x.grad_norm != y.grad_norm) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST(TaskPair, TeachersDifferByRotation) {
    const SyntheticTaskPair p = small_pair(90.0);
    const DenseMatrix d = matmul_tn(p.teacher_B, p.teacher_B);
    const DenseMatrix e = matmul_tn(p.teacher_A, p.teacher_A);
    EXPECT_LT(max_abs_diff(d, e), 1e-12);
    EXPECT_GT(max_abs_diff(p.teacher_A, p.teacher_B), 0.1);
    const SyntheticTaskPair q = small_pair(0.0);
    EXPECT_TRUE(bitwise_equal(q.teacher_A, q.teacher_B));
}

TEST(TaskPair, Deterministic) {
    const SyntheticTaskPair a = small_pair();
    const SyntheticTaskPair b = small_pair();
    EXPECT_TRUE(bitwise_equal(a.task_B.x_train, b.task_B.x_train));
    EXPECT_TRUE(bitwise_equal(a.task_A.y_eval, b.task_A.y_eval));
}

TEST(TaskPair, RejectsBadSpec) {
    TaskPairSpec s;
    s.n_train = 0;
    EXPECT_THROW(make_task_pair(s), ParameterError);
    s = {};
    s.noise_std = -1;
    EXPECT_THROW(make_task_pair(s), ParameterError);
    s = {};
    s.a_dominant_dims = 17;
    EXPECT_THROW(make_task_pair(s), ParameterError);
}

TEST(Train, ZeroRankMatchesSft) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::linear, 6, 5, 0, 1, 1.0);
    const TrainResult sft = train_rpsft(m0, p.task_B, {}, quick(TrainMode::sft, 0));
    const TrainResult rp = train_rpsft(m0, p.task_B, bases_for(m0, quick(TrainMode::rpsft, 0)), quick(TrainMode::rpsft, 0));
    EXPECT_TRUE(bitwise_equal(sft.model.layer("linear.weight"), rp.model.layer("linear.weight")));
    EXPECT_TRUE(same_trace(sft.trace, rp.trace));
}

TEST(Train, ZeroLambdaMatchesSft) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::two_layer_tanh, 6, 5, 8, 1, 1.0);
    TrainConfig cfg = quick(TrainMode::rpsft, 3);
    cfg.reg.lambda = 0.0;
    const TrainResult rp = train_rpsft(m0, p.task_B, bases_for(m0, cfg), cfg);
    const TrainResult sft = train_rpsft(m0, p.task_B, {}, quick(TrainMode::sft, 0));
    EXPECT_TRUE(bitwise_equal(sft.model.layer("hidden.weight"), rp.model.layer("hidden.weight")));
}

TEST(Train, LossDecreases) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::linear, 6, 5, 0, 1, 1.0);
    TrainConfig cfg = quick(TrainMode::sft, 0, 200);
    cfg.batch_size = 64;
    const TrainResult r = train_rpsft(m0, p.task_B, {}, cfg);
    EXPECT_LT(r.trace.records.back().task_loss, 0.5 * r.trace.records.front().task_loss);
}

TEST(Train, DriftShrinksWithLambda) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::linear, 6, 5, 0, 1, 1.0);
    double prev = INFINITY;
    for (double lambda : {0.5, 2.0, 8.0}) {
        TrainConfig cfg = quick(TrainMode::rpsft, 2, 150);
        cfg.reg.lambda = lambda;
        cfg.learning_rate = 0.02;
        const TrainResult r = train_rpsft(m0, p.task_B, bases_for(m0, cfg), cfg);
        const double d = r.trace.records.back().drift.at(0);
        EXPECT_LT(d, prev);
        prev = d;
    }
}

TEST(Train, UpdatePeriodSkipsPenalty) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::linear, 6, 5, 0, 1, 1.0);
    TrainConfig cfg = quick(TrainMode::rpsft, 2, 12);
    cfg.reg.update_period = 4;
    const TrainResult r = train_rpsft(m0, p.task_B, bases_for(m0, cfg), cfg);
    for (const auto& rec : r.trace.records) {
        if (rec.step % 4 != 0) {
            EXPECT_EQ(rec.penalty, 0.0);
        }
    }
    EXPECT_GT(r.trace.records[4].penalty, 0.0);
}

TEST(Train, StopLoss) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::linear, 6, 5, 0, 1, 1.0);
    TrainConfig cfg = quick(TrainMode::sft, 0, 1000);
    cfg.batch_size = 64;
    const double start = evaluate(m0, p.task_B, Split::train);
    cfg.stop_loss = 0.5 * start;
    const TrainResult r = train_rpsft(m0, p.task_B, {}, cfg);
    EXPECT_TRUE(r.stopped_early);
    EXPECT_LE(r.trace.records.back().task_loss, 0.5 * start);
    EXPECT_NEAR(evaluate(r.model, p.task_B, Split::train), r.trace.records.back().task_loss, 1e-15);
}

TEST(Train, DivergenceNamesStep) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::linear, 6, 5, 0, 1, 1.0);
    TrainConfig cfg = quick(TrainMode::sft, 0, 5000);
    cfg.learning_rate = 1e6;
    try {
        train_rpsft(m0, p.task_B, {}, cfg);
        FAIL() << "expected divergence";
    } catch (const TrainingError& e) {
        EXPECT_GT(e.step(), 0u);
    }
}

TEST(Train, ClassifierRuns) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m0 = init_model(Architecture::linear_softmax_classifier, 6, 5, 0, 1, 1.0);
    TrainConfig cfg = quick(TrainMode::rpsft, 2, 30);
    const TrainResult r = train_rpsft(m0, p.task_B, bases_for(m0, cfg), cfg);
    EXPECT_LT(r.trace.records.back().task_loss, r.trace.records.front().task_loss);
}

TEST(Objective, GradientMatchesFiniteDifference) {
    const SyntheticTaskPair p = small_pair();
    for (Architecture arch : {Architecture::linear, Architecture::two_layer_tanh, Architecture::linear_softmax_classifier}) {
        const ModelParams m = init_model(arch, 6, 5, 4, 2, 1.0);
        const SupervisedObjective obj(p.task_B, Split::train);
        LayerMap grad;
        obj.evaluate(m, {}, &grad);
        for (const auto& [name, w] : m.layers()) {
            for (std::size_t i = 0; i < w.rows(); i += 2) {
                for (std::size_t j = 0; j < w.cols(); j += 3) {
                    ModelParams plus = m;
                    ModelParams minus = m;
                    plus.layer(name)(i, j) += 1e-6;
                    minus.layer(name)(i, j) -= 1e-6;
                    const double fd = (obj.evaluate(plus, {}, nullptr) - obj.evaluate(minus, {}, nullptr)) / 2e-6;
                    EXPECT_NEAR(grad.at(name)(i, j), fd, 1e-7 + 1e-6 * std::abs(fd)) << name;
                }
            }
        }
    }
}

TEST(Stationarity, QuadraticBoundHolds) {
    Rng rng(5);
    const DenseMatrix w0 = rng.gaussian(6, 5);
    const DenseMatrix target = w0 + rng.gaussian(6, 5);
    const ModelParams m0(Architecture::linear, LayerMap{{"linear.weight", w0}});
    const QuadraticObjective obj(LayerMap{{"linear.weight", target}}, 0.5);
    const BasisSet bases{{"linear.weight", build_basis("linear.weight", w0, 2)}};
    TrainConfig cfg = quick(TrainMode::rpsft, 2, 5000);
    cfg.learning_rate = 0.2;
    cfg.grad_tol = 1e-12;
    const TrainResult r = train(m0, obj, bases, cfg);
    EXPECT_TRUE(r.stopped_early);
    const StationarityReport s = stationarity_check(r.model, obj, bases, 1.0);
    const LayerStationarity& l = s.per_layer.at("linear.weight");
    EXPECT_LT(l.stationary_residual, 1e-11);
    ASSERT_TRUE(l.bound_rhs.has_value());
    EXPECT_LE(l.drift_lhs, *l.bound_rhs * (1.0 + 1e-9));
}

TEST(Pretrain, ReachesThreshold) {
    const SyntheticTaskPair p = small_pair();
    PretrainConfig cfg;
    cfg.train.mode = TrainMode::sft;
    cfg.train.steps = 400;
    cfg.train.learning_rate = 0.1;
    cfg.hidden_dim = 8;
    cfg.loss_threshold = 0.5;
    const ModelParams m = pretrain(Architecture::linear, p.task_A, cfg);
    EXPECT_LT(evaluate(m, p.task_A, Split::eval), 0.5);
    cfg.loss_threshold = 1e-12;
    EXPECT_THROW(pretrain(Architecture::linear, p.task_A, cfg), TrainingError);
}

TEST(EnergyRank, CurveIsMonotoneAndReachesOne) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m = init_model(Architecture::linear, 6, 5, 0, 4, 1.0);
    const EnergyRankChoice c = energy_rank(m, p.task_B, "linear.weight", 0.2);
    ASSERT_EQ(c.curve.size(), 5u);
    for (std::size_t i = 1; i < c.curve.size(); ++i) {
        EXPECT_GE(c.curve[i].second, c.curve[i - 1].second);
    }
    EXPECT_TRUE(c.reached);
    EXPECT_GE(c.curve[c.rank - 1].second, 0.2);
}

TEST(PerSampleGradients, AverageToBatchGradient) {
    const SyntheticTaskPair p = small_pair();
    const ModelParams m = init_model(Architecture::two_layer_tanh, 6, 5, 4, 2, 1.0);
    const auto per = per_sample_gradients(m, p.task_B, Split::train, "hidden.weight");
    ASSERT_EQ(per.size(), 64u);
    DenseMatrix mean(per[0].rows(), per[0].cols(), 0.0);
    for (const auto& g : per) {
        mean.add_scaled(g, 1.0 / 64.0);
    }
    LayerMap grad;
    SupervisedObjective(p.task_B, Split::train).evaluate(m, {}, &grad);
    EXPECT_LT(max_abs_diff(mean, grad.at("hidden.weight")), 1e-12);
}

TEST(TrainMode, Parse) {
    EXPECT_EQ(parse_train_mode("l2_init"), TrainMode::l2_init);
    EXPECT_EQ(to_string(TrainMode::sft), "sft");
    EXPECT_THROW(parse_train_mode("adam"), ParameterError);
}
