#pragma once

#include "rpsft/matrix.hpp"

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace rpsft {

/// Per-coordinate local model on an R x R grid of singular-block coordinates,
/// laid out row-major; S_k is the top-left k x k block.
struct CoordinateProfile {
    /// In-domain learning drive g_s.
    DenseMatrix g;
    /// Curvature h_s > 0.
    DenseMatrix h;
    /// Out-of-domain sensitivity c_s >= 0.
    DenseMatrix c;

    std::size_t R() const noexcept { return g.rows(); }
    /// Throws ValidationError on non-square or mismatched arrays, h <= 0 or c < 0.
    void validate() const;
};

struct TradeoffConfig {
    double lambda = 1.0;
    double beta = 1.0;

    /// Throws ParameterError when lambda < 0 or beta <= 0.
    void validate() const;
};

/// δ*_s = g/(h + 2λ) inside S_k, g/h outside.
DenseMatrix optimal_step(const CoordinateProfile& profile, std::size_t k, double lambda);

struct TradeoffCurves {
    /// Indexed by k = 0..R.
    std::vector<double> F_ood;
    std::vector<double> G_id;
    std::vector<double> Phi;
};

TradeoffCurves curves(const CoordinateProfile& profile, const TradeoffConfig& config);

struct RankBoundary {
    /// Smallest maximizer of Phi.
    std::size_t k_star = 0;
    /// Smallest q < R whose S_q holds every c_s > 0 (0 when c vanishes);
    /// absent when only the full grid does.
    std::optional<std::size_t> q;
};

/// Throws NumericalError if k_star exceeds q with λ > 0 beyond rounding.
RankBoundary rank_boundary(const CoordinateProfile& profile, const TradeoffConfig& config);

struct ThresholdDecision {
    bool protect = false;
    double delta_id = 0.0;
    double delta_ood = 0.0;
    double threshold = 0.0;
};

/// Protect a single coordinate when β Δ_OOD > Δ_ID, equivalently c > λh/(β(h+λ)).
/// At λ = 0 both gains vanish and the coordinate is never protected.
ThresholdDecision threshold_decision(double g, double h, double c, double lambda, double beta);

struct EnergyRank {
    std::size_t rank = 0;
    /// False when no entry reached the target; rank is then the largest r.
    bool reached = true;
};

/// Smallest r whose fraction reaches target_fraction. Throws ParameterError on
/// an empty or non-monotone curve or a target outside (0, 1).
EnergyRank rank_from_energy(const std::vector<std::pair<std::size_t, double>>& energy_curve, double target_fraction);

} // namespace rpsft
