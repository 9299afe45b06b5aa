#pragma once

#include "rpsft/matrix.hpp"
#include "rpsft/model.hpp"
#include "rpsft/protected_subspace.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rpsft {

/// Samples as rows.
struct TaskData {
    DenseMatrix x_train;
    DenseMatrix y_train;
    DenseMatrix x_eval;
    DenseMatrix y_eval;
};

enum class Split { train, eval };

struct TaskPairSpec {
    std::size_t input_dim = 16;
    std::size_t output_dim = 16;
    /// Degrees.
    double rotation_angle = 30.0;
    double noise_std = 0.0;
    std::size_t n_train = 256;
    std::size_t n_eval = 256;
    std::uint64_t seed = 0;
    /// Task-A inputs have unit variance along this many random orthonormal
    /// directions and `a_background_std` elsewhere. 0 makes them isotropic.
    std::size_t a_dominant_dims = 0;
    double a_background_std = 1.0;
};

/// Two regression tasks whose teachers differ by a planar rotation in output
/// space: teacher_B = R teacher_A. Task-B inputs are always isotropic.
struct SyntheticTaskPair {
    TaskPairSpec spec;
    DenseMatrix teacher_A;
    DenseMatrix teacher_B;
    TaskData task_A;
    TaskData task_B;
};

/// Throws ParameterError on zero dims or sample counts, negative noise, or
/// a_dominant_dims > input_dim.
SyntheticTaskPair make_task_pair(const TaskPairSpec& spec);

/// Differentiable training objective over a model's layers.
class Objective {
public:
    virtual ~Objective() = default;
    /// Number of training samples; 0 when the objective is not a sum over samples.
    virtual std::size_t sample_count() const = 0;
    /// Loss on the given sample rows (all rows when empty); writes the gradient
    /// of each layer into `grad` when non-null.
    virtual double evaluate(const ModelParams& model, std::span<const std::size_t> rows, LayerMap* grad) const = 0;
};

/// Mean squared error per output entry for regression architectures, mean
/// cross-entropy against argmax(y) labels for the classifier.
class SupervisedObjective final : public Objective {
public:
    SupervisedObjective(const DenseMatrix& x, const DenseMatrix& y);
    SupervisedObjective(const TaskData& task, Split split);

    std::size_t sample_count() const override { return x_.rows(); }
    double evaluate(const ModelParams& model, std::span<const std::size_t> rows, LayerMap* grad) const override;

private:
    DenseMatrix x_;
    DenseMatrix y_;
};

/// f(W) = ½ Σ_layers Σ_ij h_ij (W_ij - T_ij)², curvature h elementwise positive.
class QuadraticObjective final : public Objective {
public:
    QuadraticObjective(LayerMap targets, LayerMap curvature);
    /// Uniform curvature h on every entry.
    QuadraticObjective(LayerMap targets, double h);

    std::size_t sample_count() const override { return 0; }
    double evaluate(const ModelParams& model, std::span<const std::size_t> rows, LayerMap* grad) const override;

    const LayerMap& targets() const noexcept { return targets_; }
    const LayerMap& curvature() const noexcept { return curvature_; }

private:
    LayerMap targets_;
    LayerMap curvature_;
};

enum class TrainMode {
    /// Plain fine-tuning; bases are ignored.
    sft,
    rpsft,
    /// Full-rank anchoring ||W - W0||_F^2.
    l2_init,
};

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view name);

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t steps = 1000;
    /// Minibatch size; at least the sample count means full batch.
    std::size_t batch_size = 256;
    RegularizerConfig reg;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::rpsft;
    /// Stop before the update once the step's task loss is at or below this.
    std::optional<double> stop_loss;
    /// Stop once the total gradient norm falls below this (0 disables).
    double grad_tol = 0.0;

    /// Throws ParameterError on a non-positive learning rate, steps or batch size.
    void validate() const;
};

/// Penalty column is 0 on steps where the penalty is not evaluated.
struct TraceRecord {
    std::size_t step = 0;
    double task_loss = 0.0;
    double penalty = 0.0;
    double total_loss = 0.0;
    /// ||U_kᵀ(W - W0)V_k||_F per basis layer.
    std::vector<double> drift;
    /// Frobenius norm of the applied gradient per model layer.
    std::vector<double> grad_norm;
};

struct TrainTrace {
    std::vector<std::string> drift_layers;
    std::vector<std::string> grad_layers;
    std::vector<TraceRecord> records;
};

struct TrainResult {
    ModelParams model;
    TrainTrace trace;
    /// True when stop_loss or grad_tol ended the run early.
    bool stopped_early = false;
};

/// Bases implied by the mode: none for sft, rank reg.k for rpsft, full rank for l2_init.
BasisSet bases_for(const ModelParams& model0, const TrainConfig& config);

/// Gradient descent on task loss + λ·penalty, the penalty gradient being added
/// on steps with step % update_period == 0. Each trace record holds the values
/// before that step's update. With λ = 0, an empty basis set or mode sft the
/// penalty is skipped entirely. Throws TrainingError on a non-finite loss.
TrainResult train(const ModelParams& model0, const Objective& objective, const BasisSet& bases,
                  const TrainConfig& config);
TrainResult train_rpsft(const ModelParams& model0, const TaskData& task_B, const BasisSet& bases,
                        const TrainConfig& config);

struct PretrainConfig {
    TrainConfig train;
    std::size_t hidden_dim = 32;
    double init_scale = 1.0;
    /// Required task-A eval loss.
    double loss_threshold = 1.0;
};

/// Plain fine-tuning of a seeded init on task A. Throws TrainingError naming the
/// achieved eval loss when it stays above loss_threshold.
ModelParams pretrain(Architecture arch, const TaskData& task_A, const PretrainConfig& config);

double evaluate(const ModelParams& model, const TaskData& task, Split split);

struct LayerStationarity {
    /// ||U_kᵀ(W - W0)V_k||_F
    double drift_lhs = 0.0;
    /// ||∇f(W)||_F / (2λ); absent when λ = 0.
    std::optional<double> bound_rhs;
    /// ||U_kᵀ ∇f V_k + 2λ U_kᵀ(W - W0)V_k||_F
    double stationary_residual = 0.0;
    double task_grad_norm = 0.0;
};

struct StationarityReport {
    /// Norm of the full regularized gradient over all layers.
    double grad_norm = 0.0;
    std::map<std::string, LayerStationarity> per_layer;
};

StationarityReport stationarity_check(const ModelParams& model, const Objective& objective, const BasisSet& bases,
                                      double lambda);

/// Per-sample task-loss gradients of one layer on a split.
std::vector<DenseMatrix> per_sample_gradients(const ModelParams& model, const TaskData& task, Split split,
                                              const std::string& layer);

struct EnergyRankChoice {
    std::size_t rank = 0;
    bool reached = false;
    std::vector<std::pair<std::size_t, double>> curve;
};
/// Rank whose top r×r singular block of `layer` holds target_fraction of the
/// per-sample task gradient energy on the train split.
EnergyRankChoice energy_rank(const ModelParams& model, const TaskData& task, const std::string& layer,
                             double target_fraction);

struct ForgettingConfig {
    TaskPairSpec task;
    std::size_t hidden_dim = 32;
    PretrainConfig pretrain;
    /// Fine-tuning settings; mode and reg.k are set per arm.
    TrainConfig finetune;
    double lambda = 1.0;
    double energy_target = 0.2;
    /// Energy rank is read from this layer and applied to all selected layers.
    std::string energy_layer = "hidden.weight";
    /// Both arms stop at this fraction of the initial task-B train loss.
    double target_fraction = 0.5;
    /// Layer whose left-subspace rotation is compared.
    std::string rotation_layer = "hidden.weight";
};

struct ForgettingArm {
    std::size_t steps = 0;
    double task_b_loss = 0.0;
    double task_a_increase = 0.0;
    double rotation = 0.0;
};

struct ForgettingRun {
    std::uint64_t seed = 0;
    std::size_t k = 0;
    double target_loss = 0.0;
    ForgettingArm sft;
    ForgettingArm rpsft;
    /// Both arms' final task-B losses within 5% relative of each other.
    bool matched = false;
};

/// Pretrain on task A, then fine-tune on task B with plain SFT and with RPSFT
/// at the energy-selected rank, both stopped at the same task-B loss.
ForgettingRun run_forgetting(const ForgettingConfig& config, std::uint64_t seed);

} // namespace rpsft
