#pragma once

#include "rpsft/matrix.hpp"
#include "rpsft/protected_subspace.hpp"

#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

namespace rpsft {

/// Task gradient ∇f(W, t) driving the flow.
class Forcing {
public:
    virtual ~Forcing() = default;
    virtual DenseMatrix gradient(const DenseMatrix& W, double t) const = 0;
};

/// ∇f = G
class ConstantForcing final : public Forcing {
public:
    explicit ConstantForcing(DenseMatrix G) : G_(std::move(G)) {}
    DenseMatrix gradient(const DenseMatrix& W, double t) const override;

private:
    DenseMatrix G_;
};

/// ∇f = H ∘ (W - W_tgt), H elementwise positive.
class QuadraticForcing final : public Forcing {
public:
    QuadraticForcing(DenseMatrix H, DenseMatrix W_tgt);
    DenseMatrix gradient(const DenseMatrix& W, double t) const override;

private:
    DenseMatrix H_;
    DenseMatrix W_tgt_;
};

/// ∇f = sin(ω t) G_amp
class SinusoidalForcing final : public Forcing {
public:
    SinusoidalForcing(DenseMatrix G_amp, double omega) : G_amp_(std::move(G_amp)), omega_(omega) {}
    DenseMatrix gradient(const DenseMatrix& W, double t) const override;

private:
    DenseMatrix G_amp_;
    double omega_;
};

struct FlowConfig {
    double lambda = 1.0;
    double t_end = 5.0;
    double dt = 1e-3;
    /// Keep W(t) at every step.
    bool retain_W = false;

    /// Throws ParameterError unless 0 < dt <= t_end, lambda >= 0 and t_end / dt
    /// is an integer to within 1e-9 relative.
    void validate() const;
    std::size_t step_count() const;
};

struct FlowTrace {
    std::vector<double> times;
    /// U_kᵀ (W(t) - W0) V_k
    std::vector<DenseMatrix> A_series;
    /// U_kᵀ ∇f(W(t)) V_k
    std::vector<DenseMatrix> G_series;
    std::vector<DenseMatrix> W_series;
};

/// Classical fixed-step RK4 on dW/dt = -∇f(W, t) - 2λ U_k (U_kᵀ W V_k - S_ref) V_kᵀ
/// from W(0) = W_start. Times are i·dt. Throws NumericalError naming the time
/// when the state turns non-finite.
FlowTrace integrate_flow(const DenseMatrix& W_start, const ProtectedBasis& basis, const Forcing& forcing,
                         const FlowConfig& config);

/// e^{-2λt} A0 - (1 - e^{-2λt})/(2λ) G; A0 - t G when λ = 0.
DenseMatrix closed_form_constant(const DenseMatrix& G, double lambda, const DenseMatrix& A0, double t);

/// Max over recorded times of ||A(t) - e^{-2λt}A(0) + ∫₀ᵗ e^{-2λ(t-s)} G(s) ds||_F
/// with trapezoidal quadrature on the trace grid. Throws ParameterError for
/// traces shorter than two points.
double volterra_residual(const FlowTrace& trace, double lambda);

} // namespace rpsft
