#include "rpsft/diagnostics.hpp"

#include "rpsft/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rpsft {

namespace {

std::string prefix_of(const std::string& name) {
    const auto dot = name.rfind('.');
    return dot == std::string::npos ? name : name.substr(0, dot);
}

std::string suffix_of(const std::string& name) {
    const auto dot = name.rfind('.');
    return dot == std::string::npos ? std::string() : name.substr(dot + 1);
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return s / static_cast<double>(v.size());
}

std::vector<double> column_mean(const DenseMatrix& m) {
    std::vector<double> mu(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            mu[j] += m(i, j);
        }
    }
    for (double& x : mu) {
        x /= static_cast<double>(m.rows());
    }
    return mu;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

} // namespace

void GradientBatch::validate() const {
    if (samples.empty()) {
        throw ParameterError("gradient batch is empty");
    }
    for (const auto& g : samples) {
        if (!g.same_shape(samples.front())) {
            throw ParameterError("gradient batch mixes shapes");
        }
    }
}

double fisher_energy_ratio(const GradientBatch& batch, const OrthonormalBasis& U_r, const OrthonormalBasis& V_r) {
    batch.validate();
    if (U_r.dim() != batch.rows() || V_r.dim() != batch.cols()) {
        throw ParameterError("bases do not conform to the gradient shape");
    }
    double captured = 0.0;
    double total = 0.0;
    for (const auto& g : batch.samples) {
        captured += squared_norm(matmul(matmul_tn(U_r.columns(), g), V_r.columns()));
        total += squared_norm(g);
    }
    if (!(total > 0.0)) {
        throw NumericalError("energy ratio undefined: every gradient is zero");
    }
    return std::clamp(captured / total, 0.0, 1.0);
}

std::vector<EnergyPoint> fisher_energy_curve(const GradientBatch& batch, const SvdResult& svd,
                                             const std::vector<std::size_t>& ranks) {
    batch.validate();
    const std::size_t R = svd.sigma.size();
    if (svd.U.rows() != batch.rows() || svd.V.rows() != batch.cols()) {
        throw ParameterError("svd does not conform to the gradient shape");
    }
    if (ranks.empty()) {
        throw ParameterError("energy curve needs at least one rank");
    }
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (ranks[i] < 1 || ranks[i] > R || (i > 0 && ranks[i] <= ranks[i - 1])) {
            throw ParameterError("energy curve ranks must be strictly increasing within 1.." + std::to_string(R));
        }
    }
    // project every gradient once into the full singular basis, then read blocks
    std::vector<DenseMatrix> projected;
    projected.reserve(batch.samples.size());
    double total = 0.0;
    for (const auto& g : batch.samples) {
        projected.push_back(matmul(matmul_tn(svd.U, g), svd.V));
        total += squared_norm(g);
    }
    if (!(total > 0.0)) {
        throw NumericalError("energy ratio undefined: every gradient is zero");
    }
    // energy of the ring added when the block grows from (r-1)x(r-1) to r x r;
    // prefix sums of non-negative terms keep the curve monotone after rounding
    std::vector<double> cumulative(R + 1, 0.0);
    for (std::size_t r = 1; r <= R; ++r) {
        double ring = 0.0;
        for (const auto& p : projected) {
            for (std::size_t i = 0; i < r; ++i) {
                ring += p(i, r - 1) * p(i, r - 1);
            }
            for (std::size_t j = 0; j + 1 < r; ++j) {
                ring += p(r - 1, j) * p(r - 1, j);
            }
        }
        cumulative[r] = cumulative[r - 1] + ring;
    }
    std::vector<EnergyPoint> curve;
    for (std::size_t r : ranks) {
        curve.push_back({r, static_cast<double>(r * r) / static_cast<double>(R * R),
                         std::clamp(cumulative[r] / total, 0.0, 1.0)});
    }
    return curve;
}

LayerGroups default_layer_groups(const LayerMap& layers) {
    LayerGroups groups;
    for (const auto& [name, _] : layers) {
        const std::string group = prefix_of(name);
        if (groups.empty() || groups.back().first != group) {
            groups.push_back({group, {}});
        }
        groups.back().second.push_back(name);
    }
    return groups;
}

std::vector<GroupSignal> first_order_signal(const LayerMap& base, const LayerMap& ckpt,
                                            const std::map<std::string, GradientBatch>& grads,
                                            const LayerGroups& groups) {
    std::vector<GroupSignal> out;
    for (const auto& [group, members] : groups) {
        if (members.empty()) {
            throw ParameterError("layer group " + group + " is empty");
        }
        double sum = 0.0;
        for (const auto& name : members) {
            auto b = base.find(name);
            auto c = ckpt.find(name);
            auto g = grads.find(name);
            if (b == base.end() || c == ckpt.end() || g == grads.end()) {
                throw ParameterError("layer " + name + " missing from base, checkpoint or gradients");
            }
            require_same_shape(b->second, c->second, "first-order signal weights");
            g->second.validate();
            if (!g->second.samples.front().same_shape(b->second)) {
                throw ParameterError("gradients of " + name + " do not match the weight shape");
            }
            DenseMatrix mean_grad(b->second.rows(), b->second.cols());
            for (const auto& s : g->second.samples) {
                mean_grad += s;
            }
            mean_grad *= 1.0 / static_cast<double>(g->second.samples.size());
            sum += frobenius_inner(mean_grad, c->second - b->second);
        }
        out.push_back({group, sum / static_cast<double>(members.size())});
    }
    return out;
}

double mean_left_rotation(const SvdResult& base, const SvdResult& tuned, std::size_t K) {
    if (base.U.rows() != tuned.U.rows() || K < 1 || K > base.sigma.size() || K > tuned.sigma.size()) {
        throw ParameterError("rotation rank " + std::to_string(K) + " invalid for these matrices");
    }
    const auto angles = principal_angles(OrthonormalBasis(leading_columns(base.U, K)),
                                         OrthonormalBasis(leading_columns(tuned.U, K)));
    return mean(angles);
}

double mean_left_rotation(const DenseMatrix& W_base, const DenseMatrix& W_tuned, std::size_t K) {
    require_same_shape(W_base, W_tuned, "rotation");
    return mean_left_rotation(svd_full(W_base, "base weight"), svd_full(W_tuned, "tuned weight"), K);
}

RotationReport rotation_layerwise(const LayerMap& base, const LayerMap& tuned, const std::set<std::string>& types,
                                  std::size_t cap) {
    if (cap < 1) {
        throw ParameterError("rotation cap must be positive");
    }
    std::map<std::string, std::vector<double>> per_layer;
    std::set<std::string> seen;
    RotationReport report;
    for (const auto& [name, w] : base) {
        const std::string layer = prefix_of(name);
        seen.insert(layer);
        if (types.count(suffix_of(name)) == 0) {
            continue;
        }
        auto t = tuned.find(name);
        if (t == tuned.end()) {
            report.warnings.push_back("matrix " + name + " missing from tuned model");
            continue;
        }
        require_same_shape(w, t->second, "rotation of " + name);
        const std::size_t K = std::min({cap, w.rows(), w.cols()});
        per_layer[layer].push_back(mean_left_rotation(w, t->second, K));
    }
    for (const auto& layer : seen) {
        auto it = per_layer.find(layer);
        if (it == per_layer.end()) {
            report.warnings.push_back("layer " + layer + " has no matching type; omitted");
            continue;
        }
        report.layers.push_back({layer, mean(it->second)});
    }
    return report;
}

std::vector<RankRotation> rotation_rankwise(const DenseMatrix& W_base, const DenseMatrix& W_tuned,
                                            const std::vector<std::size_t>& ranks, std::size_t cap) {
    require_same_shape(W_base, W_tuned, "rankwise rotation");
    const std::size_t limit = std::min({cap, W_base.rows(), W_base.cols()});
    for (std::size_t r : ranks) {
        if (r < 1 || r > limit) {
            throw ParameterError("rotation rank " + std::to_string(r) + " outside 1.." + std::to_string(limit));
        }
    }
    const SvdResult a = svd_full(W_base, "base weight");
    const SvdResult b = svd_full(W_tuned, "tuned weight");
    std::vector<RankRotation> out;
    for (std::size_t r : ranks) {
        out.push_back({r, mean_left_rotation(a, b, r)});
    }
    return out;
}

HiddenDrift hidden_drift(const std::vector<HiddenStateSet>& sets, const std::string& base_model) {
    if (sets.empty()) {
        throw ParameterError("hidden drift needs at least one state set");
    }
    const std::size_t p = sets.front().rows.cols();
    std::size_t total_rows = 0;
    std::size_t base_index = sets.size();
    std::set<std::string> tags;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const auto& s = sets[i];
        if (s.rows.empty()) {
            throw ParameterError("hidden state set " + s.model + " is empty");
        }
        if (s.rows.cols() != p) {
            throw ParameterError("hidden state set " + s.model + " has dimension " + std::to_string(s.rows.cols()) +
                                 ", expected " + std::to_string(p));
        }
        if (s.dataset != sets.front().dataset) {
            throw ParameterError("hidden state sets mix datasets " + sets.front().dataset + " and " + s.dataset);
        }
        if (!tags.insert(s.model).second) {
            throw ParameterError("duplicate model tag " + s.model);
        }
        if (s.model == base_model) {
            base_index = i;
        }
        total_rows += s.rows.rows();
    }
    if (base_index == sets.size()) {
        throw ParameterError("no hidden state set for base model " + base_model);
    }

    DenseMatrix stack(total_rows, p);
    HiddenDrift out;
    std::size_t offset = 0;
    for (const auto& s : sets) {
        for (std::size_t i = 0; i < s.rows.rows(); ++i) {
            std::copy(s.rows.row(i).begin(), s.rows.row(i).end(), stack.row(offset + i).begin());
            out.sample_models.push_back(s.model);
        }
        offset += s.rows.rows();
    }
    const std::vector<double> mu = column_mean(stack);
    for (std::size_t i = 0; i < stack.rows(); ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            stack(i, j) -= mu[j];
        }
    }
    const SvdResult svd = svd_full(stack, "centered hidden states");
    const std::size_t components = std::min<std::size_t>(2, svd.V.cols());
    const DenseMatrix directions = leading_columns(svd.V, components);
    out.pca_coords = DenseMatrix(total_rows, 2);
    const DenseMatrix projected = matmul(stack, directions);
    for (std::size_t i = 0; i < total_rows; ++i) {
        for (std::size_t c = 0; c < components; ++c) {
            out.pca_coords(i, c) = projected(i, c);
        }
    }

    std::vector<std::vector<double>> raw_centroids;
    std::vector<std::vector<double>> pca_centroids;
    offset = 0;
    for (const auto& s : sets) {
        raw_centroids.push_back(column_mean(s.rows));
        std::vector<double> c(2, 0.0);
        for (std::size_t i = 0; i < s.rows.rows(); ++i) {
            c[0] += out.pca_coords(offset + i, 0);
            c[1] += out.pca_coords(offset + i, 1);
        }
        c[0] /= static_cast<double>(s.rows.rows());
        c[1] /= static_cast<double>(s.rows.rows());
        pca_centroids.push_back(std::move(c));
        offset += s.rows.rows();
    }
    for (std::size_t i = 0; i < sets.size(); ++i) {
        out.models.push_back({sets[i].model, distance(raw_centroids[i], raw_centroids[base_index]),
                              distance(pca_centroids[i], pca_centroids[base_index]), pca_centroids[i][0],
                              pca_centroids[i][1]});
    }
    return out;
}

void ProbSequence::validate(std::size_t cap) const {
    if (steps.empty() || steps.size() > cap) {
        throw ValidationError("probability sequence length " + std::to_string(steps.size()) + " outside 1.." +
                              std::to_string(cap));
    }
    const std::size_t vocab = steps.front().size();
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& p = steps[t];
        if (p.empty() || p.size() != vocab) {
            throw ValidationError("probability vector " + std::to_string(t) + " has the wrong size");
        }
        double total = 0.0;
        for (double v : p) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw ValidationError("probability vector " + std::to_string(t) + " has a negative or non-finite entry");
            }
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ValidationError("probability vector " + std::to_string(t) + " sums to " + std::to_string(total));
        }
    }
}

double kde_bandwidth(double sample_std, std::size_t n) {
    if (n < 1) {
        throw ParameterError("bandwidth needs at least one sample");
    }
    // 106 / 100 rather than the inexact literal 1.06 keeps the quotient correctly rounded.
    return 106.0 * sample_std / (100.0 * std::pow(static_cast<double>(n), 0.2));
}

EntropyProfile entropy_profile(const std::vector<ProbSequence>& seqs, std::size_t cap) {
    EntropyProfile out;
    for (const auto& seq : seqs) {
        seq.validate(cap);
        long double sum = 0.0L;
        for (const auto& p : seq.steps) {
            for (double v : p) {
                if (v > 0.0) {
                    sum -= static_cast<long double>(v) * std::log(static_cast<long double>(v));
                }
            }
        }
        out.e_values.push_back(static_cast<double>(sum / static_cast<long double>(seq.steps.size())));
    }
    const std::size_t n = out.e_values.size();
    if (n < 2) {
        return out;
    }
    const double mu = mean(out.e_values);
    double ss = 0.0;
    for (double e : out.e_values) {
        ss += (e - mu) * (e - mu);
    }
    const double s = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(s > 0.0)) {
        return out;
    }
    Kde kde;
    kde.bandwidth = kde_bandwidth(s, n);
    const auto [lo_it, hi_it] = std::minmax_element(out.e_values.begin(), out.e_values.end());
    const double lo = *lo_it - 3.0 * kde.bandwidth;
    const double hi = *hi_it + 3.0 * kde.bandwidth;
    const double norm = 1.0 / (static_cast<double>(n) * kde.bandwidth * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < kKdeGridPoints; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kKdeGridPoints - 1);
        double d = 0.0;
        for (double e : out.e_values) {
            const double z = (x - e) / kde.bandwidth;
            d += std::exp(-0.5 * z * z);
        }
        kde.grid.push_back(x);
        kde.density.push_back(d * norm);
    }
    out.kde = std::move(kde);
    return out;
}

} // namespace rpsft
