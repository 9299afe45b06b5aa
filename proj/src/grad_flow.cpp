#include "rpsft/grad_flow.hpp"

#include "rpsft/error.hpp"

#include <cmath>
#include <sstream>

namespace rpsft {

DenseMatrix ConstantForcing::gradient(const DenseMatrix& W, double) const {
    require_same_shape(W, G_, "constant forcing");
    return G_;
}

QuadraticForcing::QuadraticForcing(DenseMatrix H, DenseMatrix W_tgt) : H_(std::move(H)), W_tgt_(std::move(W_tgt)) {
    require_same_shape(H_, W_tgt_, "quadratic forcing");
    for (double h : H_.data()) {
        if (!(h > 0.0)) {
            throw ParameterError("quadratic forcing curvature must be positive");
        }
    }
}

DenseMatrix QuadraticForcing::gradient(const DenseMatrix& W, double) const {
    require_same_shape(W, W_tgt_, "quadratic forcing");
    DenseMatrix g(W.rows(), W.cols());
    for (std::size_t i = 0; i < W.size(); ++i) {
        g.data()[i] = H_.data()[i] * (W.data()[i] - W_tgt_.data()[i]);
    }
    return g;
}

DenseMatrix SinusoidalForcing::gradient(const DenseMatrix& W, double t) const {
    require_same_shape(W, G_amp_, "sinusoidal forcing");
    return std::sin(omega_ * t) * G_amp_;
}

void FlowConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("flow lambda must be a finite value >= 0");
    }
    if (!(dt > 0.0) || !(t_end >= dt) || !std::isfinite(t_end)) {
        throw ParameterError("flow needs 0 < dt <= t_end");
    }
    const double n = t_end / dt;
    if (std::abs(n - std::round(n)) > 1e-9 * n) {
        throw ParameterError("t_end must be an integer multiple of dt");
    }
}

std::size_t FlowConfig::step_count() const {
    return static_cast<std::size_t>(std::llround(t_end / dt));
}

FlowTrace integrate_flow(const DenseMatrix& W_start, const ProtectedBasis& basis, const Forcing& forcing,
                         const FlowConfig& config) {
    config.validate();
    if (W_start.rows() != basis.rows() || W_start.cols() != basis.cols()) {
        throw ParameterError("flow start does not match the basis shape");
    }
    const DenseMatrix& U = basis.U_k().columns();
    const DenseMatrix& V = basis.V_k().columns();
    const double lambda = config.lambda;

    auto rhs = [&](const DenseMatrix& W, double t) {
        DenseMatrix d = forcing.gradient(W, t);
        if (lambda > 0.0) {
            DenseMatrix a = protected_drift(W, basis);
            a *= 2.0 * lambda;
            d += matmul_nt(matmul(U, a), V);
        }
        d *= -1.0;
        return d;
    };

    FlowTrace trace;
    const std::size_t n = config.step_count();
    const double dt = config.dt;
    auto record = [&](const DenseMatrix& W, double t) {
        if (!W.all_finite()) {
            std::ostringstream msg;
            msg << "flow state became non-finite at t = " << t;
            throw NumericalError(msg.str());
        }
        trace.times.push_back(t);
        trace.A_series.push_back(protected_drift(W, basis));
        trace.G_series.push_back(matmul(matmul_tn(U, forcing.gradient(W, t)), V));
        if (config.retain_W) {
            trace.W_series.push_back(W);
        }
    };

    DenseMatrix W = W_start;
    record(W, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * dt;
        const DenseMatrix k1 = rhs(W, t);
        const DenseMatrix k2 = rhs(W + (0.5 * dt) * k1, t + 0.5 * dt);
        const DenseMatrix k3 = rhs(W + (0.5 * dt) * k2, t + 0.5 * dt);
        const DenseMatrix k4 = rhs(W + dt * k3, t + dt);
        DenseMatrix incr = k1;
        incr.add_scaled(k2, 2.0);
        incr.add_scaled(k3, 2.0);
        incr += k4;
        W.add_scaled(incr, dt / 6.0);
        record(W, static_cast<double>(i + 1) * dt);
    }
    return trace;
}

DenseMatrix closed_form_constant(const DenseMatrix& G, double lambda, const DenseMatrix& A0, double t) {
    require_same_shape(G, A0, "closed form");
    if (G.rows() != G.cols()) {
        throw ParameterError("closed form expects k x k blocks");
    }
    if (!(lambda >= 0.0) || !(t >= 0.0)) {
        throw ParameterError("closed form needs lambda >= 0 and t >= 0");
    }
    if (lambda == 0.0) {
        return A0 - t * G;
    }
    const double decay = std::exp(-2.0 * lambda * t);
    // -expm1 keeps 1 - e^{-x} accurate for small x
    return decay * A0 - (-std::expm1(-2.0 * lambda * t) / (2.0 * lambda)) * G;
}

double volterra_residual(const FlowTrace& trace, double lambda) {
    const std::size_t n = trace.times.size();
    if (n < 2 || trace.A_series.size() != n || trace.G_series.size() != n) {
        throw ParameterError("volterra residual needs a trace with at least two aligned points");
    }
    if (!(lambda >= 0.0)) {
        throw ParameterError("lambda must be >= 0");
    }
    const DenseMatrix& A0 = trace.A_series.front();
    // I(t_i) = ∫₀^{t_i} e^{-2λ(t_i - s)} G(s) ds, advanced one interval at a time
    DenseMatrix integral(A0.rows(), A0.cols());
    double worst = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double h = trace.times[i] - trace.times[i - 1];
        const double decay = std::exp(-2.0 * lambda * h);
        integral *= decay;
        integral.add_scaled(trace.G_series[i - 1], 0.5 * h * decay);
        integral.add_scaled(trace.G_series[i], 0.5 * h);
        DenseMatrix r = trace.A_series[i];
        r.add_scaled(A0, -std::exp(-2.0 * lambda * trace.times[i]));
        r += integral;
        worst = std::max(worst, frobenius_norm(r));
    }
    return worst;
}

} // namespace rpsft
