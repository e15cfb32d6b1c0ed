#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fer/numerics.hpp"

namespace fer {

/// One dense layer. W is fan_in x fan_out, b is fan_out.
struct DenseLayer {
    Matrix W;
    Vector b;
};

/// Fully-connected ReLU network. Hidden layers use ReLU, the last layer is
/// affine and emits logits.
class MlpModel {
public:
    MlpModel() = default;

    /// Kaiming-uniform init: W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), b = 0.
    /// Deterministic for a fixed seed.
    static MlpModel init(const std::vector<Eigen::Index>& layer_sizes, std::uint64_t seed);

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<Eigen::Index>& layer_sizes() const { return sizes_; }
    std::uint64_t seed() const { return seed_; }

    Eigen::Index input_dim() const { return sizes_.front(); }
    Eigen::Index output_dim() const { return sizes_.back(); }
    Eigen::Index parameter_count() const;

    /// Parameters flattened in layer order (W row-major, then b). Used by the
    /// gradient checker and the checkpoint container.
    Vector flatten_parameters() const;
    void set_parameters(const Eigen::Ref<const Vector>& flat);

    void save(const std::string& path) const;
    static MlpModel load(const std::string& path);

private:
    std::vector<DenseLayer> layers_;
    std::vector<Eigen::Index> sizes_;
    std::uint64_t seed_ = 0;
};

/// Forward-pass cache: logits plus everything backward needs.
struct BatchOutput {
    Matrix logits;                        // batch x K
    std::vector<Matrix> layer_inputs;     // input to each layer (post-activation of previous)
    std::vector<Matrix> pre_activations;  // z_l for each layer
};

/// Per-layer parameter gradients, mean-reduced over the batch.
struct GradientSet {
    std::vector<Matrix> dW;
    std::vector<Vector> db;
};

/// SGD with classic momentum and coupled weight decay:
///   v <- m*v + g + w*theta;  theta <- theta - lr*v
struct OptimizerState {
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<Matrix> vW;
    std::vector<Vector> vb;

    static OptimizerState make(const MlpModel& model, double lr, double momentum,
                               double weight_decay);
};

BatchOutput forward(const MlpModel& model, const Eigen::Ref<const Matrix>& batch);

GradientSet backward(const MlpModel& model, const BatchOutput& cache,
                     const Eigen::Ref<const Matrix>& dloss_dlogits);

void sgd_step(MlpModel& model, OptimizerState& state, const GradientSet& grads);

/// Gradients flattened in the same order as MlpModel::flatten_parameters.
Vector flatten_gradients(const GradientSet& grads);

} // namespace fer
