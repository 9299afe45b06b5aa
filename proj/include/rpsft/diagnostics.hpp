#pragma once

#include "rpsft/linalg.hpp"
#include "rpsft/matrix.hpp"
#include "rpsft/model.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace rpsft {

/// Per-sample gradients of one weight matrix.
struct GradientBatch {
    std::vector<DenseMatrix> samples;

    /// Throws ParameterError when empty or shapes differ.
    void validate() const;
    std::size_t rows() const { return samples.front().rows(); }
    std::size_t cols() const { return samples.front().cols(); }
};

/// Σ_t ||U_rᵀ G_t V_r||² / Σ_t ||G_t||². Throws NumericalError when every
/// gradient is zero.
double fisher_energy_ratio(const GradientBatch& batch, const OrthonormalBasis& U_r, const OrthonormalBasis& V_r);

struct EnergyPoint {
    std::size_t r = 0;
    /// r² / R²
    double x = 0.0;
    double y = 0.0;
};

/// Energy ratio of the top r×r block of `svd` for each r in `ranks` (strictly
/// increasing, within 1..R with R = min(m, n)).
std::vector<EnergyPoint> fisher_energy_curve(const GradientBatch& batch, const SvdResult& svd,
                                             const std::vector<std::size_t>& ranks);

/// Ordered (group name, member layers).
using LayerGroups = std::vector<std::pair<std::string, std::vector<std::string>>>;

/// One group per layer-name prefix (text before the last '.').
LayerGroups default_layer_groups(const LayerMap& layers);

struct GroupSignal {
    std::string group;
    /// Mean over the group's matrices of <mean gradient, W_ckpt - W_base>.
    double m = 0.0;
};

/// Negative values mean the update points along the local descent direction.
/// Throws ParameterError when layers are missing or shapes differ.
std::vector<GroupSignal> first_order_signal(const LayerMap& base, const LayerMap& ckpt,
                                            const std::map<std::string, GradientBatch>& grads,
                                            const LayerGroups& groups);

/// Mean principal angle (degrees) between the first K left singular vectors
/// of two equally shaped matrices.
double mean_left_rotation(const DenseMatrix& W_base, const DenseMatrix& W_tuned, std::size_t K);
double mean_left_rotation(const SvdResult& base, const SvdResult& tuned, std::size_t K);

struct LayerRotation {
    std::string layer;
    double degrees = 0.0;
};

struct RotationReport {
    std::vector<LayerRotation> layers;
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultRotationCap = 512;

/// Layer names split as "{layer}.{type}". Per matched type K = min(cap, rows,
/// cols); a layer's value is the mean over its available types. Layers without
/// a requested type, or missing from `tuned`, are omitted with a warning.
RotationReport rotation_layerwise(const LayerMap& base, const LayerMap& tuned, const std::set<std::string>& types,
                                  std::size_t cap = kDefaultRotationCap);

struct RankRotation {
    std::size_t r = 0;
    double degrees = 0.0;
};

/// y(r) for each r in `ranks` (each within 1..min(cap, rows, cols)).
std::vector<RankRotation> rotation_rankwise(const DenseMatrix& W_base, const DenseMatrix& W_tuned,
                                            const std::vector<std::size_t>& ranks,
                                            std::size_t cap = kDefaultRotationCap);

struct HiddenStateSet {
    std::string model;
    std::string dataset;
    /// One pooled hidden vector per row.
    DenseMatrix rows;
};

struct ModelDrift {
    std::string model;
    /// ||μ_model - μ_base||₂ in the raw space
    double d_hidden = 0.0;
    /// same in PCA coordinates
    double d_pca = 0.0;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
};

struct HiddenDrift {
    std::vector<ModelDrift> models;
    /// Two PCA coordinates per sample, sets stacked in input order.
    DenseMatrix pca_coords;
    /// Model tag of each pca_coords row.
    std::vector<std::string> sample_models;
};

/// PCA uses the top two right singular vectors of the stacked rows centered by
/// their combined mean (one component when p = 1). Throws ParameterError when
/// base_model is absent, tags repeat, or sets disagree on p or dataset.
HiddenDrift hidden_drift(const std::vector<HiddenStateSet>& sets, const std::string& base_model);

inline constexpr std::size_t kDefaultSequenceCap = 128;

struct ProbSequence {
    /// One probability vector per step.
    std::vector<std::vector<double>> steps;

    /// Throws ValidationError unless 1 <= length <= cap, all vectors share one
    /// size and each is non-negative summing to 1 within 1e-9.
    void validate(std::size_t cap = kDefaultSequenceCap) const;
};

inline constexpr std::size_t kKdeGridPoints = 256;

struct Kde {
    double bandwidth = 0.0;
    std::vector<double> grid;
    std::vector<double> density;
};

struct EntropyProfile {
    /// Mean natural-log entropy per sequence.
    std::vector<double> e_values;
    /// Absent when fewer than two sequences or zero spread.
    std::optional<Kde> kde;
};

/// 1.06 · s · N^(-1/5)
double kde_bandwidth(double sample_std, std::size_t n);

EntropyProfile entropy_profile(const std::vector<ProbSequence>& seqs, std::size_t cap = kDefaultSequenceCap);

} // namespace rpsft
