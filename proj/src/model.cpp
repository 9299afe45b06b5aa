#include "rpsft/model.hpp"

#include "rpsft/error.hpp"
#include "rpsft/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rpsft {

namespace {

constexpr const char* kLinear = "linear.weight";
constexpr const char* kHidden = "hidden.weight";
constexpr const char* kOutput = "output.weight";
constexpr const char* kClassifier = "classifier.weight";

std::string shape(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool has_exactly(const LayerMap& layers, std::initializer_list<const char*> names) {
    if (layers.size() != names.size()) {
        return false;
    }
    return std::all_of(names.begin(), names.end(), [&](const char* n) { return layers.count(n) == 1; });
}

DenseMatrix apply_tanh(DenseMatrix m) {
    for (double& v : m.data()) {
        v = std::tanh(v);
    }
    return m;
}

} // namespace

std::string_view to_string(Architecture arch) {
    switch (arch) {
    case Architecture::linear:
        return "linear";
    case Architecture::two_layer_tanh:
        return "two_layer_tanh";
    case Architecture::linear_softmax_classifier:
        return "linear_softmax_classifier";
    }
    return "unknown";
}

Architecture parse_architecture(std::string_view name) {
    for (auto arch : {Architecture::linear, Architecture::two_layer_tanh, Architecture::linear_softmax_classifier}) {
        if (name == to_string(arch)) {
            return arch;
        }
    }
    throw ParameterError("unknown architecture '" + std::string(name) +
                         "' (expected linear, two_layer_tanh or linear_softmax_classifier)");
}

Architecture infer_architecture(const LayerMap& layers) {
    if (has_exactly(layers, {kLinear})) {
        return Architecture::linear;
    }
    if (has_exactly(layers, {kHidden, kOutput})) {
        return Architecture::two_layer_tanh;
    }
    if (has_exactly(layers, {kClassifier})) {
        return Architecture::linear_softmax_classifier;
    }
    std::string names;
    for (const auto& [name, _] : layers) {
        names += (names.empty() ? "" : ", ") + name;
    }
    throw ValidationError("layer set {" + names + "} matches no known architecture");
}

ModelParams::ModelParams(Architecture arch, LayerMap layers) : arch_(arch), layers_(std::move(layers)) {
    if (infer_architecture(layers_) != arch_) {
        throw ValidationError("layer names do not match architecture " + std::string(to_string(arch_)));
    }
    for (const auto& [name, w] : layers_) {
        if (w.empty()) {
            throw ValidationError("layer " + name + " is empty");
        }
        if (!w.all_finite()) {
            throw ValidationError("layer " + name + " contains non-finite entries");
        }
    }
    if (arch_ == Architecture::two_layer_tanh && layers_.at(kOutput).cols() != layers_.at(kHidden).rows()) {
        throw ValidationError("output.weight " + shape(layers_.at(kOutput)) + " does not follow hidden.weight " +
                              shape(layers_.at(kHidden)));
    }
}

const DenseMatrix& ModelParams::layer(const std::string& name) const {
    auto it = layers_.find(name);
    if (it == layers_.end()) {
        throw ParameterError("model has no layer " + name);
    }
    return it->second;
}

DenseMatrix& ModelParams::layer(const std::string& name) {
    auto it = layers_.find(name);
    if (it == layers_.end()) {
        throw ParameterError("model has no layer " + name);
    }
    return it->second;
}

std::size_t ModelParams::input_dim() const {
    switch (arch_) {
    case Architecture::linear:
        return layers_.at(kLinear).cols();
    case Architecture::two_layer_tanh:
        return layers_.at(kHidden).cols();
    case Architecture::linear_softmax_classifier:
        return layers_.at(kClassifier).cols();
    }
    return 0;
}

std::size_t ModelParams::output_dim() const {
    switch (arch_) {
    case Architecture::linear:
        return layers_.at(kLinear).rows();
    case Architecture::two_layer_tanh:
        return layers_.at(kOutput).rows();
    case Architecture::linear_softmax_classifier:
        return layers_.at(kClassifier).rows();
    }
    return 0;
}

ModelParams init_model(Architecture arch, std::size_t input_dim, std::size_t output_dim, std::size_t hidden_dim,
                       std::uint64_t seed, double scale) {
    if (input_dim == 0 || output_dim == 0 || (arch == Architecture::two_layer_tanh && hidden_dim == 0)) {
        throw ParameterError("model dimensions must be positive");
    }
    Rng rng(seed);
    LayerMap layers;
    switch (arch) {
    case Architecture::linear:
        layers.emplace(kLinear, rng.gaussian(output_dim, input_dim, scale / std::sqrt(double(input_dim))));
        break;
    case Architecture::two_layer_tanh:
        layers.emplace(kHidden, rng.gaussian(hidden_dim, input_dim, scale / std::sqrt(double(input_dim))));
        layers.emplace(kOutput, rng.gaussian(output_dim, hidden_dim, scale / std::sqrt(double(hidden_dim))));
        break;
    case Architecture::linear_softmax_classifier:
        layers.emplace(kClassifier, rng.gaussian(output_dim, input_dim, scale / std::sqrt(double(input_dim))));
        break;
    }
    return ModelParams(arch, std::move(layers));
}

DenseMatrix forward(const ModelParams& model, const DenseMatrix& x) {
    if (x.cols() != model.input_dim()) {
        throw ParameterError("input has " + std::to_string(x.cols()) + " features, model expects " +
                             std::to_string(model.input_dim()));
    }
    switch (model.architecture()) {
    case Architecture::linear:
        return matmul_nt(x, model.layer(kLinear));
    case Architecture::two_layer_tanh:
        return matmul_nt(apply_tanh(matmul_nt(x, model.layer(kHidden))), model.layer(kOutput));
    case Architecture::linear_softmax_classifier:
        return matmul_nt(x, model.layer(kClassifier));
    }
    return {};
}

DenseMatrix hidden_states(const ModelParams& model, const DenseMatrix& x) {
    if (model.architecture() == Architecture::two_layer_tanh) {
        if (x.cols() != model.input_dim()) {
            throw ParameterError("input has " + std::to_string(x.cols()) + " features, model expects " +
                                 std::to_string(model.input_dim()));
        }
        return apply_tanh(matmul_nt(x, model.layer(kHidden)));
    }
    return forward(model, x);
}

DenseMatrix softmax_rows(const DenseMatrix& logits) {
    DenseMatrix p = logits;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        auto row = p.row(i);
        const double top = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double& v : row) {
            v = std::exp(v - top);
            total += v;
        }
        for (double& v : row) {
            v /= total;
        }
    }
    return p;
}

} // namespace rpsft
