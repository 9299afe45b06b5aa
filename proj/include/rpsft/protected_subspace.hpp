#pragma once

#include "rpsft/linalg.hpp"
#include "rpsft/matrix.hpp"
#include "rpsft/model.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rpsft {

/// Relative singular gap below which the protected subspace is not unique.
inline constexpr double kDegenerateGap = 1e-8;

/// Cached top-k bases of a pretrained matrix W0 and the reference block
/// S_ref = U_kᵀ W0 V_k. Immutable.
class ProtectedBasis {
public:
    /// sigma_gap is absent when the basis was not built from an SVD (e.g. loaded
    /// from a checkpoint). Throws ParameterError on inconsistent shapes.
    ProtectedBasis(std::string layer_name, OrthonormalBasis U_k, OrthonormalBasis V_k, DenseMatrix S_ref,
                   std::optional<double> sigma_gap = std::nullopt, double sigma_1 = 0.0);

    const std::string& layer_name() const noexcept { return layer_name_; }
    std::size_t k() const noexcept { return U_k_.rank(); }
    std::size_t rows() const noexcept { return U_k_.dim(); }
    std::size_t cols() const noexcept { return V_k_.dim(); }
    const OrthonormalBasis& U_k() const noexcept { return U_k_; }
    const OrthonormalBasis& V_k() const noexcept { return V_k_; }
    const DenseMatrix& S_ref() const noexcept { return S_ref_; }
    /// sigma_k - sigma_{k+1}, with sigma_{k+1} = 0 when k = min(m, n).
    std::optional<double> sigma_gap() const noexcept { return sigma_gap_; }
    /// True when sigma_gap < kDegenerateGap * sigma_1; the basis is then one
    /// deterministic choice among several spanning different subspaces.
    bool degenerate() const noexcept { return !warning_.empty(); }
    const std::string& warning() const noexcept { return warning_; }

private:
    std::string layer_name_;
    OrthonormalBasis U_k_;
    OrthonormalBasis V_k_;
    DenseMatrix S_ref_;
    std::optional<double> sigma_gap_;
    std::string warning_;
};

/// Throws ParameterError unless 1 <= k <= min(m, n).
ProtectedBasis build_basis(std::string layer_name, const DenseMatrix& W0, std::size_t k);
/// Same, reusing an SVD of W0 computed elsewhere.
ProtectedBasis build_basis(std::string layer_name, const DenseMatrix& W0, const SvdResult& svd, std::size_t k);

/// U_kᵀ W V_k
DenseMatrix protected_block(const DenseMatrix& W, const ProtectedBasis& basis);
/// U_kᵀ W V_k - S_ref
DenseMatrix protected_drift(const DenseMatrix& W, const ProtectedBasis& basis);

/// ||U_kᵀ W V_k - S_ref||_F^2. Exactly 0 when W is the matrix the basis was built from.
double penalty(const DenseMatrix& W, const ProtectedBasis& basis);
/// 2 U_k (U_kᵀ W V_k - S_ref) V_kᵀ
DenseMatrix penalty_gradient(const DenseMatrix& W, const ProtectedBasis& basis);
/// penalty(W0 + B A) for an adapter B (m x r), A (r x n).
double penalty_lora(const DenseMatrix& A, const DenseMatrix& B, const DenseMatrix& W0, const ProtectedBasis& basis);

struct CostAccounting {
    std::uint64_t extra_floats_per_layer;
    std::uint64_t flops_per_eval;
    double amortized_flops_per_step;
    double heuristic_relative_overhead;
};

/// Memory and FLOP cost of the penalty for one m x n layer at rank k evaluated
/// every s steps.
///
/// flops_per_eval = 2mnk + 2nk² + 3k²: U_kᵀ W, then (U_kᵀ W) V_k, then the
/// subtraction of S_ref and the squared sum over the k x k block.
CostAccounting cost_accounting(std::uint64_t m, std::uint64_t n, std::uint64_t k, std::uint64_t s);

/// Matches `name` against a shell-style pattern with '*' and '?'.
bool glob_match(std::string_view pattern, std::string_view name);

struct RegularizerConfig {
    double lambda = 1.0;
    /// Protected rank applied to every selected layer; 0 disables the penalty.
    std::size_t k = 0;
    /// Penalty gradient is added on steps with step % update_period == 0.
    std::size_t update_period = 1;
    std::vector<std::string> layer_selector{"*"};

    /// Throws ParameterError when lambda < 0, update_period == 0 or the selector is empty.
    void validate() const;
    bool selects(std::string_view layer_name) const;
};

/// Sentinel for "k = min(m, n) in every layer".
inline constexpr std::size_t kFullRank = std::numeric_limits<std::size_t>::max();

using BasisSet = std::map<std::string, ProtectedBasis>;

/// Bases for every selected layer at rank k (kFullRank for full rank). k = 0
/// yields an empty set. Throws ParameterError when k exceeds a selected layer's
/// min(m, n) or the selector matches no layer.
BasisSet build_bases(const LayerMap& layers, const std::vector<std::string>& layer_selector, std::size_t k);
BasisSet build_bases(const LayerMap& layers, const RegularizerConfig& config);

} // namespace rpsft
