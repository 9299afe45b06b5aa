#include "rpsft/error.hpp"
#include "rpsft/grad_flow.hpp"
#include "rpsft/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rpsft;

namespace {

struct FlowCase {
    DenseMatrix W0;
    ProtectedBasis basis;
    DenseMatrix G;
};

FlowCase setup(std::uint64_t seed, std::size_t k = 2) {
    Rng rng(seed);
    DenseMatrix W0 = rng.gaussian(5, 4);
    ProtectedBasis b = build_basis("w", W0, k);
    return {W0, b, rng.gaussian(5, 4)};
}

DenseMatrix project(const ProtectedBasis& b, const DenseMatrix& m) {
    return matmul(matmul_tn(b.U_k().columns(), m), b.V_k().columns());
}

} // namespace

TEST(ClosedForm, Values) {
    const DenseMatrix G{{1.0}};
    const DenseMatrix A0{{2.0}};
    EXPECT_DOUBLE_EQ(closed_form_constant(G, 0.5, A0, 0.0)(0, 0), 2.0);
    const double t = 1.3;
    const double e = std::exp(-t);
    EXPECT_NEAR(closed_form_constant(G, 0.5, A0, t)(0, 0), e * 2.0 - (1 - e), 1e-15);
    EXPECT_DOUBLE_EQ(closed_form_constant(G, 0.0, A0, t)(0, 0), 2.0 - t);
}

TEST(ClosedForm, SmallLambdaApproachesLinear) {
    const DenseMatrix G{{1.5}};
    const DenseMatrix A0{{0.0}};
    EXPECT_NEAR(closed_form_constant(G, 1e-14, A0, 2.0)(0, 0), -3.0, 1e-12);
}

TEST(Flow, ConstantMatchesClosedForm) {
    const FlowCase s = setup(1);
    FlowConfig cfg;
    cfg.lambda = 0.7;
    cfg.t_end = 2.0;
    cfg.dt = 1e-2;
    const FlowTrace tr = integrate_flow(s.W0, s.basis, ConstantForcing(s.G), cfg);
    ASSERT_EQ(tr.times.size(), 201u);
    const DenseMatrix Gp = project(s.basis, s.G);
    const DenseMatrix A0(2, 2, 0.0);
    for (std::size_t i = 0; i < tr.times.size(); i += 20) {
        EXPECT_LT(max_abs_diff(tr.A_series[i], closed_form_constant(Gp, 0.7, A0, tr.times[i])), 1e-9);
    }
}

TEST(Flow, ZeroLambdaIsLinearDrift) {
    const FlowCase s = setup(2);
    FlowConfig cfg;
    cfg.lambda = 0.0;
    cfg.t_end = 1.0;
    cfg.dt = 0.1;
    const FlowTrace tr = integrate_flow(s.W0, s.basis, ConstantForcing(s.G), cfg);
    const DenseMatrix expected = -1.0 * project(s.basis, s.G);
    EXPECT_LT(max_abs_diff(tr.A_series.back(), expected), 1e-12);
}

TEST(Flow, NonzeroStartDecays) {
    const FlowCase s = setup(3);
    Rng rng(4);
    const DenseMatrix start = s.W0 + rng.gaussian(5, 4, 0.3);
    FlowConfig cfg;
    cfg.lambda = 1.0;
    cfg.t_end = 1.0;
    cfg.dt = 1e-3;
    const DenseMatrix zero(5, 4, 0.0);
    const FlowTrace tr = integrate_flow(start, s.basis, ConstantForcing(zero), cfg);
    const DenseMatrix expected = closed_form_constant(project(s.basis, zero), 1.0, tr.A_series.front(), 1.0);
    EXPECT_LT(max_abs_diff(tr.A_series.back(), expected), 1e-12);
}

TEST(Flow, VolterraResidualSmall) {
    const FlowCase s = setup(5);
    FlowConfig cfg;
    cfg.t_end = 5.0;
    cfg.dt = 1e-3;
    EXPECT_LT(volterra_residual(integrate_flow(s.W0, s.basis, SinusoidalForcing(s.G, 3.0), cfg), 1.0), 1e-3);
    const DenseMatrix H(5, 4, 0.8);
    EXPECT_LT(volterra_residual(integrate_flow(s.W0, s.basis, QuadraticForcing(H, s.W0 + s.G), cfg), 1.0), 1e-3);
}

TEST(Flow, RetainW) {
    const FlowCase s = setup(6);
    FlowConfig cfg;
    cfg.t_end = 0.1;
    cfg.dt = 0.01;
    cfg.retain_W = true;
    const FlowTrace tr = integrate_flow(s.W0, s.basis, ConstantForcing(s.G), cfg);
    ASSERT_EQ(tr.W_series.size(), tr.times.size());
    EXPECT_TRUE(bitwise_equal(tr.W_series.front(), s.W0));
}

TEST(Flow, ConfigValidation) {
    FlowConfig cfg;
    cfg.dt = 0.3;
    cfg.t_end = 1.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg.dt = 2.0;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = {};
    cfg.lambda = -1;
    EXPECT_THROW(cfg.validate(), ParameterError);
    cfg = {};
    EXPECT_EQ(cfg.step_count(), 5000u);
}

TEST(Flow, BlowUpNamesTime) {
    const FlowCase s = setup(7);
    FlowConfig cfg;
    cfg.lambda = 1e200;
    cfg.t_end = 1.0;
    cfg.dt = 0.5;
    EXPECT_THROW(integrate_flow(s.W0, s.basis, ConstantForcing(s.G), cfg), NumericalError);
}

TEST(Volterra, ShortTraceRejected) {
    FlowTrace tr;
    tr.times = {0.0};
    tr.A_series = {DenseMatrix(1, 1, 0.0)};
    tr.G_series = {DenseMatrix(1, 1, 0.0)};
    EXPECT_THROW(volterra_residual(tr, 1.0), ParameterError);
}
