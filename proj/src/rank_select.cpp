#include "rpsft/rank_select.hpp"

#include "rpsft/error.hpp"

#include <cmath>
#include <string>

namespace rpsft {

namespace {

struct Sums {
    double protected_part = 0.0;
    double free_part = 0.0;
};

} // namespace

void CoordinateProfile::validate() const {
    if (g.empty() || g.rows() != g.cols() || !g.same_shape(h) || !g.same_shape(c)) {
        throw ValidationError("coordinate profile arrays must share one square shape");
    }
    if (!g.all_finite() || !h.all_finite() || !c.all_finite()) {
        throw ValidationError("coordinate profile has non-finite entries");
    }
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(h.data()[i] > 0.0)) {
            throw ValidationError("curvature h must be positive at coordinate " + std::to_string(i));
        }
        if (c.data()[i] < 0.0) {
            throw ValidationError("sensitivity c must be non-negative at coordinate " + std::to_string(i));
        }
    }
}

void TradeoffConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("lambda must be a finite value >= 0");
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw ParameterError("beta must be a finite value > 0");
    }
}

DenseMatrix optimal_step(const CoordinateProfile& profile, std::size_t k, double lambda) {
    profile.validate();
    const std::size_t R = profile.R();
    if (k > R) {
        throw ParameterError("protected rank " + std::to_string(k) + " exceeds R = " + std::to_string(R));
    }
    if (!(lambda >= 0.0)) {
        throw ParameterError("lambda must be >= 0");
    }
    DenseMatrix step(R, R);
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < R; ++j) {
            const bool in_block = i < k && j < k;
            const double denom = in_block ? profile.h(i, j) + 2.0 * lambda : profile.h(i, j);
            step(i, j) = profile.g(i, j) / denom;
        }
    }
    return step;
}

TradeoffCurves curves(const CoordinateProfile& profile, const TradeoffConfig& config) {
    profile.validate();
    config.validate();
    const std::size_t R = profile.R();
    const double lambda = config.lambda;
    TradeoffCurves out;
    for (std::size_t k = 0; k <= R; ++k) {
        Sums ood;
        Sums id;
        for (std::size_t i = 0; i < R; ++i) {
            for (std::size_t j = 0; j < R; ++j) {
                const double g = profile.g(i, j);
                const double h = profile.h(i, j);
                const double c = profile.c(i, j);
                const double g2 = g * g;
                if (i < k && j < k) {
                    const double hp = h + 2.0 * lambda;
                    ood.protected_part += c * g2 / (hp * hp);
                    id.protected_part += g2 / hp - 0.5 * h * g2 / (hp * hp);
                } else {
                    ood.free_part += c * g2 / (h * h);
                    id.free_part += g2 / h;
                }
            }
        }
        const double f = 0.5 * ood.protected_part + 0.5 * ood.free_part;
        const double gid = id.protected_part + 0.5 * id.free_part;
        out.F_ood.push_back(f);
        out.G_id.push_back(gid);
        out.Phi.push_back(gid - config.beta * f);
    }
    return out;
}

RankBoundary rank_boundary(const CoordinateProfile& profile, const TradeoffConfig& config) {
    const TradeoffCurves tc = curves(profile, config);
    const std::size_t R = profile.R();
    RankBoundary out;
    for (std::size_t k = 1; k <= R; ++k) {
        if (tc.Phi[k] > tc.Phi[out.k_star]) {
            out.k_star = k;
        }
    }
    std::size_t cover = 0;
    for (std::size_t i = 0; i < R; ++i) {
        for (std::size_t j = 0; j < R; ++j) {
            if (profile.c(i, j) > 0.0) {
                cover = std::max(cover, std::max(i, j) + 1);
            }
        }
    }
    if (cover < R) {
        out.q = cover;
    }
    if (out.q && config.lambda > 0.0 && out.k_star > *out.q) {
        // beyond q only adaptation is lost, so Phi(k_star) can beat Phi(q) by rounding alone
        const double slack = 1e-12 * (std::abs(tc.Phi[*out.q]) + std::abs(tc.G_id[*out.q]));
        if (tc.Phi[out.k_star] - tc.Phi[*out.q] > slack) {
            throw NumericalError("rank boundary violated: k* = " + std::to_string(out.k_star) +
                                 " > q = " + std::to_string(*out.q));
        }
    }
    return out;
}

ThresholdDecision threshold_decision(double g, double h, double c, double lambda, double beta) {
    if (!(h > 0.0) || !(beta > 0.0) || !(lambda >= 0.0) || !(c >= 0.0) || !std::isfinite(g)) {
        throw ParameterError("threshold_decision needs h > 0, beta > 0, lambda >= 0, c >= 0 and finite g");
    }
    ThresholdDecision d;
    const double hp = h + 2.0 * lambda;
    d.delta_id = 2.0 * lambda * lambda * g * g / (h * hp * hp);
    d.delta_ood = 2.0 * c * lambda * (h + lambda) * g * g / (h * h * hp * hp);
    d.threshold = lambda * h / (beta * (h + lambda));
    if (lambda == 0.0 || g == 0.0) {
        d.protect = false;
        return d;
    }
    d.protect = beta * d.delta_ood > d.delta_id;
    const bool by_threshold = c > d.threshold;
    if (d.protect != by_threshold) {
        // the two sides differ by a factor that rounds; only accept disagreement at the boundary
        const double gap = std::abs(c - d.threshold);
        if (gap > 1e-12 * std::max(c, d.threshold)) {
            throw NumericalError("threshold rule and utility comparison disagree");
        }
    }
    return d;
}

EnergyRank rank_from_energy(const std::vector<std::pair<std::size_t, double>>& energy_curve, double target_fraction) {
    if (energy_curve.empty()) {
        throw ParameterError("energy curve is empty");
    }
    if (!(target_fraction > 0.0 && target_fraction < 1.0)) {
        throw ParameterError("target fraction must lie in (0, 1)");
    }
    for (std::size_t i = 1; i < energy_curve.size(); ++i) {
        if (energy_curve[i].first <= energy_curve[i - 1].first || energy_curve[i].second < energy_curve[i - 1].second) {
            throw ParameterError("energy curve must be increasing in r and non-decreasing in fraction");
        }
    }
    for (const auto& [r, fraction] : energy_curve) {
        if (fraction >= target_fraction) {
            return {r, true};
        }
    }
    return {energy_curve.back().first, false};
}

} // namespace rpsft
