#pragma once

#include "rpsft/matrix.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace rpsft {

/// Named weight matrices, iterated in name order.
using LayerMap = std::map<std::string, DenseMatrix>;

enum class Architecture {
    /// y = W x, layer "linear.weight"
    linear,
    /// y = W2 tanh(W1 x), layers "hidden.weight" and "output.weight"
    two_layer_tanh,
    /// p = softmax(W x), layer "classifier.weight"
    linear_softmax_classifier,
};

std::string_view to_string(Architecture arch);
/// Throws ParameterError for unknown names.
Architecture parse_architecture(std::string_view name);

/// Weights of a small model. Matrices are (fan_out x fan_in) and samples are
/// rows, so a layer maps X (N x fan_in) to X Wᵀ.
class ModelParams {
public:
    /// Validates layer names, shapes and finiteness against `arch`.
    ModelParams(Architecture arch, LayerMap layers);

    Architecture architecture() const noexcept { return arch_; }
    const LayerMap& layers() const noexcept { return layers_; }
    const DenseMatrix& layer(const std::string& name) const;
    /// Shape-preserving access for optimizers.
    DenseMatrix& layer(const std::string& name);

    std::size_t input_dim() const;
    std::size_t output_dim() const;

private:
    Architecture arch_;
    LayerMap layers_;
};

/// Infers the architecture from the layer names. Throws ValidationError when
/// the set matches none.
Architecture infer_architecture(const LayerMap& layers);

/// Gaussian init with standard deviation scale / sqrt(fan_in). hidden_dim is
/// ignored by single-layer architectures.
ModelParams init_model(Architecture arch, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_dim,
                       std::uint64_t seed, double scale = 1.0);

/// Raw outputs X Wᵀ (logits for the classifier), N x output_dim.
DenseMatrix forward(const ModelParams& model, const DenseMatrix& x);

/// Hidden representation per sample: tanh activations for two_layer_tanh,
/// raw outputs otherwise.
DenseMatrix hidden_states(const ModelParams& model, const DenseMatrix& x);

/// Row-wise softmax.
DenseMatrix softmax_rows(const DenseMatrix& logits);

} // namespace rpsft
