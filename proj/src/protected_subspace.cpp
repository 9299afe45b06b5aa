#include "rpsft/protected_subspace.hpp"

#include "rpsft/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rpsft {

namespace {

void require_conformable(const DenseMatrix& W, const ProtectedBasis& basis) {
    if (W.rows() != basis.rows() || W.cols() != basis.cols()) {
        throw ParameterError("matrix " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                             " does not match basis of layer " + basis.layer_name() + " (" +
                             std::to_string(basis.rows()) + "x" + std::to_string(basis.cols()) + ")");
    }
}

} // namespace

ProtectedBasis::ProtectedBasis(std::string layer_name, OrthonormalBasis U_k, OrthonormalBasis V_k, DenseMatrix S_ref,
                               std::optional<double> sigma_gap, double sigma_1)
    : layer_name_(std::move(layer_name)), U_k_(std::move(U_k)), V_k_(std::move(V_k)), S_ref_(std::move(S_ref)),
      sigma_gap_(sigma_gap) {
    const std::size_t k = U_k_.rank();
    if (V_k_.rank() != k || S_ref_.rows() != k || S_ref_.cols() != k) {
        throw ParameterError("protected basis for " + layer_name_ + ": U_k, V_k and S_ref ranks disagree");
    }
    if (!S_ref_.all_finite()) {
        throw ValidationError("protected basis for " + layer_name_ + ": S_ref has non-finite entries");
    }
    if (sigma_gap_ && *sigma_gap_ < kDegenerateGap * sigma_1) {
        std::ostringstream msg;
        msg.precision(3);
        msg << "layer " << layer_name_ << ": singular gap " << *sigma_gap_ << " at rank " << k
            << " is below 1e-8 * sigma_1; protected subspace is not unique";
        warning_ = msg.str();
    }
}

ProtectedBasis build_basis(std::string layer_name, const DenseMatrix& W0, std::size_t k) {
    const SvdResult svd = svd_full(W0, layer_name);
    return build_basis(std::move(layer_name), W0, svd, k);
}

ProtectedBasis build_basis(std::string layer_name, const DenseMatrix& W0, const SvdResult& svd, std::size_t k) {
    const std::size_t r = std::min(W0.rows(), W0.cols());
    if (k < 1 || k > r) {
        throw ParameterError("protected rank " + std::to_string(k) + " for layer " + layer_name + " outside 1.." +
                             std::to_string(r));
    }
    if (svd.U.rows() != W0.rows() || svd.V.rows() != W0.cols()) {
        throw ParameterError("svd does not belong to layer " + layer_name);
    }
    TruncatedSvd t = truncate(svd, k);
    DenseMatrix s_ref = matmul(matmul_tn(t.U_k.columns(), W0), t.V_k.columns());
    const double sigma_1 = svd.sigma.front();
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j && std::abs(s_ref(i, j)) >= 1e-8 * sigma_1 && sigma_1 > 0.0) {
                throw NumericalError("reference block of layer " + layer_name + " is not diagonal");
            }
        }
    }
    const double next = k < r ? svd.sigma[k] : 0.0;
    return ProtectedBasis(std::move(layer_name), std::move(t.U_k), std::move(t.V_k), std::move(s_ref),
                          svd.sigma[k - 1] - next, sigma_1);
}

DenseMatrix protected_block(const DenseMatrix& W, const ProtectedBasis& basis) {
    require_conformable(W, basis);
    return matmul(matmul_tn(basis.U_k().columns(), W), basis.V_k().columns());
}

DenseMatrix protected_drift(const DenseMatrix& W, const ProtectedBasis& basis) {
    DenseMatrix d = protected_block(W, basis);
    d -= basis.S_ref();
    return d;
}

double penalty(const DenseMatrix& W, const ProtectedBasis& basis) {
    return squared_norm(protected_drift(W, basis));
}

DenseMatrix penalty_gradient(const DenseMatrix& W, const ProtectedBasis& basis) {
    DenseMatrix d = protected_drift(W, basis);
    d *= 2.0;
    return matmul_nt(matmul(basis.U_k().columns(), d), basis.V_k().columns());
}

double penalty_lora(const DenseMatrix& A, const DenseMatrix& B, const DenseMatrix& W0, const ProtectedBasis& basis) {
    if (B.cols() != A.rows() || B.rows() != W0.rows() || A.cols() != W0.cols()) {
        throw ParameterError("adapter B (" + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) + ") * A (" +
                             std::to_string(A.rows()) + "x" + std::to_string(A.cols()) + ") does not conform to W0 (" +
                             std::to_string(W0.rows()) + "x" + std::to_string(W0.cols()) + ")");
    }
    return penalty(W0 + matmul(B, A), basis);
}

CostAccounting cost_accounting(std::uint64_t m, std::uint64_t n, std::uint64_t k, std::uint64_t s) {
    if (m < 1 || n < 1 || k < 1 || s < 1 || k > std::min(m, n)) {
        throw ParameterError("cost_accounting needs m, n, k, s >= 1 and k <= min(m, n)");
    }
    CostAccounting c{};
    c.extra_floats_per_layer = (m + n) * k + k * k;
    c.flops_per_eval = 2 * m * n * k + 2 * n * k * k + 3 * k * k;
    c.amortized_flops_per_step = static_cast<double>(c.flops_per_eval) / static_cast<double>(s);
    c.heuristic_relative_overhead = static_cast<double>(k) / (static_cast<double>(s) * static_cast<double>(std::min(m, n)));
    return c;
}

bool glob_match(std::string_view pattern, std::string_view name) {
    std::size_t p = 0;
    std::size_t n = 0;
    std::size_t star = std::string_view::npos;
    std::size_t resume = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            resume = n;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            n = ++resume;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') {
        ++p;
    }
    return p == pattern.size();
}

void RegularizerConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("regularizer lambda must be a finite value >= 0");
    }
    if (update_period < 1) {
        throw ParameterError("regularizer update_period must be >= 1");
    }
    if (layer_selector.empty()) {
        throw ParameterError("regularizer layer_selector is empty");
    }
}

bool RegularizerConfig::selects(std::string_view layer_name) const {
    return std::any_of(layer_selector.begin(), layer_selector.end(),
                       [&](const std::string& p) { return glob_match(p, layer_name); });
}

BasisSet build_bases(const LayerMap& layers, const std::vector<std::string>& layer_selector, std::size_t k) {
    BasisSet out;
    if (k == 0) {
        return out;
    }
    for (const auto& [name, w] : layers) {
        const bool selected = std::any_of(layer_selector.begin(), layer_selector.end(),
                                          [&](const std::string& p) { return glob_match(p, name); });
        if (!selected) {
            continue;
        }
        const std::size_t rank = k == kFullRank ? std::min(w.rows(), w.cols()) : k;
        out.emplace(name, build_basis(name, w, rank));
    }
    if (out.empty()) {
        throw ParameterError("layer selector matches no layer");
    }
    return out;
}

BasisSet build_bases(const LayerMap& layers, const RegularizerConfig& config) {
    config.validate();
    return build_bases(layers, config.layer_selector, config.k);
}

} // namespace rpsft
