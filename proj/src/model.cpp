#include "fer/model.hpp"

#include <cstring>
#include <fstream>

#include "fer/errors.hpp"
#include "fer/rng.hpp"

namespace fer {

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'E', 'R', 'M', 'D', 'L', '0', '1'};

void write_raw(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::istream& is, void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw ParseError(std::string("checkpoint: truncated while reading ") + what);
}

} // namespace

MlpModel MlpModel::init(const std::vector<Eigen::Index>& layer_sizes, std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw ConfigError("init_model: need at least 2 layer sizes");
    for (auto s : layer_sizes)
        if (s <= 0) throw ConfigError("init_model: layer sizes must be positive");

    MlpModel m;
    m.sizes_ = layer_sizes;
    m.seed_ = seed;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const Eigen::Index fan_in = layer_sizes[l];
        const Eigen::Index fan_out = layer_sizes[l + 1];
        DenseLayer layer;
        layer.W.resize(fan_in, fan_out);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < fan_in; ++i)
            for (Eigen::Index j = 0; j < fan_out; ++j)
                layer.W(i, j) = rng.uniform(-bound, bound);
        layer.b = Vector::Zero(fan_out);
        m.layers_.push_back(std::move(layer));
    }
    return m;
}

Eigen::Index MlpModel::parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.W.size() + l.b.size();
    return n;
}

Vector MlpModel::flatten_parameters() const {
    Vector flat(parameter_count());
    Eigen::Index pos = 0;
    for (const auto& l : layers_) {
        for (Eigen::Index i = 0; i < l.W.rows(); ++i)
            for (Eigen::Index j = 0; j < l.W.cols(); ++j) flat[pos++] = l.W(i, j);
        for (Eigen::Index j = 0; j < l.b.size(); ++j) flat[pos++] = l.b[j];
    }
    return flat;
}

void MlpModel::set_parameters(const Eigen::Ref<const Vector>& flat) {
    if (flat.size() != parameter_count())
        throw ShapeError("set_parameters: flat vector size mismatch");
    Eigen::Index pos = 0;
    for (auto& l : layers_) {
        for (Eigen::Index i = 0; i < l.W.rows(); ++i)
            for (Eigen::Index j = 0; j < l.W.cols(); ++j) l.W(i, j) = flat[pos++];
        for (Eigen::Index j = 0; j < l.b.size(); ++j) l.b[j] = flat[pos++];
    }
}

void MlpModel::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("checkpoint: cannot open " + path + " for writing");
    write_raw(os, kCheckpointMagic, sizeof(kCheckpointMagic));
    write_raw(os, &seed_, sizeof(seed_));
    const std::uint64_t n_sizes = sizes_.size();
    write_raw(os, &n_sizes, sizeof(n_sizes));
    for (auto s : sizes_) {
        const std::int64_t v = s;
        write_raw(os, &v, sizeof(v));
    }
    for (const auto& l : layers_) {
        for (Eigen::Index i = 0; i < l.W.rows(); ++i)
            for (Eigen::Index j = 0; j < l.W.cols(); ++j) {
                const double v = l.W(i, j);
                write_raw(os, &v, sizeof(v));
            }
        for (Eigen::Index j = 0; j < l.b.size(); ++j) {
            const double v = l.b[j];
            write_raw(os, &v, sizeof(v));
        }
    }
    if (!os) throw ParseError("checkpoint: write failed for " + path);
}

MlpModel MlpModel::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("checkpoint: cannot open " + path);
    char magic[8];
    read_raw(is, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw ParseError("checkpoint: bad magic in " + path);

    MlpModel m;
    read_raw(is, &m.seed_, sizeof(m.seed_), "seed");
    std::uint64_t n_sizes = 0;
    read_raw(is, &n_sizes, sizeof(n_sizes), "size count");
    if (n_sizes < 2 || n_sizes > 1024) throw ParseError("checkpoint: implausible layer count");
    m.sizes_.resize(n_sizes);
    for (auto& s : m.sizes_) {
        std::int64_t v = 0;
        read_raw(is, &v, sizeof(v), "layer size");
        if (v <= 0) throw ParseError("checkpoint: nonpositive layer size");
        s = static_cast<Eigen::Index>(v);
    }
    for (std::size_t l = 0; l + 1 < m.sizes_.size(); ++l) {
        DenseLayer layer;
        layer.W.resize(m.sizes_[l], m.sizes_[l + 1]);
        for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.W.cols(); ++j)
                read_raw(is, &layer.W(i, j), sizeof(double), "weight");
        layer.b.resize(m.sizes_[l + 1]);
        for (Eigen::Index j = 0; j < layer.b.size(); ++j)
            read_raw(is, &layer.b[j], sizeof(double), "bias");
        m.layers_.push_back(std::move(layer));
    }
    return m;
}

BatchOutput forward(const MlpModel& model, const Eigen::Ref<const Matrix>& batch) {
    if (batch.cols() != model.input_dim())
        throw ShapeError("forward: feature width does not match model input");

    BatchOutput out;
    const auto& layers = model.layers();
    Matrix a = batch;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        out.layer_inputs.push_back(a);
        Matrix z = (a * layers[l].W).rowwise() + layers[l].b.transpose();
        out.pre_activations.push_back(z);
        if (l + 1 < layers.size())
            a = z.cwiseMax(0.0); // ReLU
        else
            a = std::move(z);
    }
    out.logits = std::move(a);
    return out;
}

GradientSet backward(const MlpModel& model, const BatchOutput& cache,
                     const Eigen::Ref<const Matrix>& dloss_dlogits) {
    if (dloss_dlogits.rows() != cache.logits.rows() ||
        dloss_dlogits.cols() != cache.logits.cols())
        throw ShapeError("backward: dL/dlogits shape does not match logits");

    const auto& layers = model.layers();
    const double inv_batch = 1.0 / static_cast<double>(dloss_dlogits.rows());

    GradientSet grads;
    grads.dW.resize(layers.size());
    grads.db.resize(layers.size());

    Matrix delta = dloss_dlogits;
    for (std::size_t l = layers.size(); l-- > 0;) {
        grads.dW[l] = cache.layer_inputs[l].transpose() * delta * inv_batch;
        grads.db[l] = delta.colwise().sum() * inv_batch;
        if (l > 0) {
            // ReLU subgradient at exactly 0 is 0.
            Matrix mask = (cache.pre_activations[l - 1].array() > 0.0).cast<double>();
            delta = (delta * layers[l].W.transpose()).cwiseProduct(mask);
        }
    }
    return grads;
}

OptimizerState OptimizerState::make(const MlpModel& model, double lr, double momentum,
                                    double weight_decay) {
    if (!(lr > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum in [0,1)");
    OptimizerState s;
    s.learning_rate = lr;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    for (const auto& l : model.layers()) {
        s.vW.push_back(Matrix::Zero(l.W.rows(), l.W.cols()));
        s.vb.push_back(Vector::Zero(l.b.size()));
    }
    return s;
}

Vector flatten_gradients(const GradientSet& grads) {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < grads.dW.size(); ++l)
        total += grads.dW[l].size() + grads.db[l].size();
    Vector flat(total);
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < grads.dW.size(); ++l) {
        for (Eigen::Index i = 0; i < grads.dW[l].rows(); ++i)
            for (Eigen::Index j = 0; j < grads.dW[l].cols(); ++j) flat[pos++] = grads.dW[l](i, j);
        for (Eigen::Index j = 0; j < grads.db[l].size(); ++j) flat[pos++] = grads.db[l][j];
    }
    return flat;
}

void sgd_step(MlpModel& model, OptimizerState& state, const GradientSet& grads) {
    auto& layers = model.layers();
    if (grads.dW.size() != layers.size() || state.vW.size() != layers.size())
        throw ShapeError("sgd_step: gradient/state layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (grads.dW[l].rows() != layers[l].W.rows() || grads.dW[l].cols() != layers[l].W.cols() ||
            grads.db[l].size() != layers[l].b.size())
            throw ShapeError("sgd_step: gradient shape mismatch at layer " + std::to_string(l));
        if (!grads.dW[l].allFinite() || !grads.db[l].allFinite())
            throw NumericError("sgd_step: non-finite gradient at layer " + std::to_string(l));
        state.vW[l] = state.momentum * state.vW[l] + grads.dW[l] + state.weight_decay * layers[l].W;
        state.vb[l] = state.momentum * state.vb[l] + grads.db[l] + state.weight_decay * layers[l].b;
        layers[l].W -= state.learning_rate * state.vW[l];
        layers[l].b -= state.learning_rate * state.vb[l];
    }
}

} // namespace fer
