#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fer/losses.hpp"
#include "fer/model.hpp"
#include "fer/rng.hpp"

using namespace fer;

namespace {

// Independent forward oracle: plain nested loops, no Eigen products.
Matrix oracle_forward(const MlpModel& model, const Matrix& batch) {
    const auto& layers = model.layers();
    Matrix a = batch;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix z(a.rows(), layers[l].W.cols());
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            for (Eigen::Index j = 0; j < layers[l].W.cols(); ++j) {
                double acc = layers[l].b[j];
                for (Eigen::Index i = 0; i < a.cols(); ++i) acc += a(r, i) * layers[l].W(i, j);
                z(r, j) = acc;
            }
        }
        if (l + 1 < layers.size())
            a = z.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
        else
            a = z;
    }
    return a;
}

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.uniform(-1.0, 1.0);
    return m;
}

} // namespace

TEST_CASE("init is deterministic and counts parameters") {
    const std::vector<Eigen::Index> sizes = {4, 128, 128, 3};
    const MlpModel a = MlpModel::init(sizes, 11);
    const MlpModel b = MlpModel::init(sizes, 11);
    CHECK(a.flatten_parameters() == b.flatten_parameters());

    // 4*128+128 + 128*128+128 + 128*3+3
    CHECK(a.parameter_count() == 17539);

    const MlpModel c = MlpModel::init(sizes, 12);
    CHECK(a.flatten_parameters() != c.flatten_parameters());

    // Kaiming-uniform bound and zero biases
    const double bound = std::sqrt(6.0 / 4.0);
    CHECK(a.layers()[0].W.cwiseAbs().maxCoeff() <= bound);
    CHECK(a.layers()[0].b.isZero(0.0));

    CHECK_THROWS_AS(MlpModel::init({4}, 0), ConfigError);
    CHECK_THROWS_AS(MlpModel::init({4, 0, 3}, 0), ConfigError);
    CHECK_THROWS_AS(MlpModel::init({}, 0), ConfigError);
}

TEST_CASE("forward matches the brute-force oracle") {
    Rng rng(5);
    for (int round = 0; round < 10; ++round) {
        MlpModel model = MlpModel::init({5, 7, 6, 3}, rng.next_u64());
        const Matrix batch = random_matrix(rng, 4, 5, 2.0);
        const BatchOutput out = forward(model, batch);
        const Matrix expect = oracle_forward(model, batch);
        CHECK((out.logits - expect).cwiseAbs().maxCoeff() < 1e-10);

        // deterministic: identical model+batch => identical logits bitwise
        const BatchOutput again = forward(model, batch);
        CHECK(out.logits == again.logits);
    }
}

TEST_CASE("forward edge cases") {
    MlpModel zero = MlpModel::init({3, 4, 2}, 0);
    for (auto& layer : zero.layers()) {
        layer.W.setZero();
        layer.b.setZero();
    }
    Rng rng(6);
    const Matrix batch = random_matrix(rng, 5, 3);
    CHECK(forward(zero, batch).logits.isZero(0.0));

    // single affine layer with identity weights passes inputs through
    MlpModel identity = MlpModel::init({3, 3}, 0);
    identity.layers()[0].W = Matrix::Identity(3, 3);
    identity.layers()[0].b.setZero();
    CHECK(forward(identity, batch).logits == batch);

    CHECK_THROWS_AS(forward(identity, random_matrix(rng, 2, 4)), ShapeError);
}

TEST_CASE("backward basics") {
    Rng rng(7);
    MlpModel model = MlpModel::init({4, 6, 3}, rng.next_u64());
    const Matrix batch = random_matrix(rng, 3, 4);
    const BatchOutput out = forward(model, batch);

    const GradientSet zero = backward(model, out, Matrix::Zero(3, 3));
    for (const auto& g : zero.dW) CHECK(g.isZero(0.0));
    for (const auto& g : zero.db) CHECK(g.isZero(0.0));

    CHECK_THROWS_AS(backward(model, out, Matrix::Zero(2, 3)), ShapeError);

    // mean reduction: a duplicated sample gives the same gradients as the
    // sample alone
    Matrix one = batch.topRows(1);
    Matrix two(2, 4);
    two << one, one;
    const BatchOutput out1 = forward(model, one);
    const BatchOutput out2 = forward(model, two);
    Matrix d1(1, 3), d2(2, 3);
    for (Eigen::Index j = 0; j < 3; ++j) d1(0, j) = rng.uniform(-1.0, 1.0);
    d2 << d1, d1;
    const GradientSet g1 = backward(model, out1, d1);
    const GradientSet g2 = backward(model, out2, d2);
    for (std::size_t l = 0; l < g1.dW.size(); ++l) {
        CHECK((g1.dW[l] - g2.dW[l]).cwiseAbs().maxCoeff() < 1e-15);
        CHECK((g1.db[l] - g2.db[l]).cwiseAbs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("backward matches finite differences for the composite objective") {
    Rng rng(8);
    MlpModel model = MlpModel::init({3, 5, 4}, rng.next_u64());
    const Matrix batch = random_matrix(rng, 4, 3);
    const std::vector<int> labels = {0, 2, 1, 3};
    LossSpec spec;
    spec.method = Method::Fer;
    spec.tau = 5.0;
    spec.total_epochs = 10;
    std::vector<std::optional<Vector>> targets(4);
    targets[0] = softmax_temp(random_matrix(rng, 4, 1).col(0).eval(), 1.0);
    targets[2] = softmax_temp(random_matrix(rng, 4, 1).col(0).eval(), 1.0);

    auto batch_loss = [&](const MlpModel& m) {
        const BatchOutput fwd = forward(m, batch);
        double total = 0.0;
        for (Eigen::Index i = 0; i < 4; ++i)
            total += fer_loss(fwd.logits.row(i).transpose(), labels[static_cast<std::size_t>(i)],
                              targets[static_cast<std::size_t>(i)], 6, spec)
                         .value;
        return total / 4.0;
    };

    const BatchOutput fwd = forward(model, batch);
    Matrix dlogits(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i)
        dlogits.row(i) = fer_loss(fwd.logits.row(i).transpose(), labels[static_cast<std::size_t>(i)],
                                  targets[static_cast<std::size_t>(i)], 6, spec)
                             .dlogits.transpose();
    const Vector analytic = flatten_gradients(backward(model, fwd, dlogits));

    MlpModel scratch = model;
    const double err = finite_diff_check(
        [&](const Vector& params) {
            scratch.set_parameters(params);
            return batch_loss(scratch);
        },
        analytic, model.flatten_parameters(), 1e-5);
    CHECK(err <= 1e-5);
}

TEST_CASE("ReLU subgradient at exactly zero is zero") {
    // x=2, W1=1, b1=-2 puts the hidden pre-activation exactly at 0.
    MlpModel model = MlpModel::init({1, 1, 1}, 0);
    model.layers()[0].W(0, 0) = 1.0;
    model.layers()[0].b[0] = -2.0;
    model.layers()[1].W(0, 0) = 3.0;
    model.layers()[1].b[0] = 0.0;

    Matrix x(1, 1);
    x << 2.0;
    const BatchOutput out = forward(model, x);
    CHECK(out.pre_activations[0](0, 0) == 0.0);

    Matrix d(1, 1);
    d << 1.0;
    const GradientSet g = backward(model, out, d);
    // with subgradient 1 this would be d*W2*x = 6
    CHECK(g.dW[0](0, 0) == 0.0);
    CHECK(g.db[0][0] == 0.0);
}

TEST_CASE("sgd_step update rule") {
    Rng rng(9);
    MlpModel model = MlpModel::init({2, 3, 2}, rng.next_u64());
    const Vector before = model.flatten_parameters();

    GradientSet grads;
    for (const auto& l : model.layers()) {
        grads.dW.push_back(Matrix::Constant(l.W.rows(), l.W.cols(), 0.5));
        grads.db.push_back(Vector::Constant(l.b.size(), 0.5));
    }

    SUBCASE("zero learning rate leaves parameters unchanged") {
        OptimizerState opt = OptimizerState::make(model, 0.1, 0.9, 0.0);
        opt.learning_rate = 0.0;
        sgd_step(model, opt, grads);
        CHECK(model.flatten_parameters() == before);
    }

    SUBCASE("plain gradient descent when momentum and decay are zero") {
        OptimizerState opt = OptimizerState::make(model, 0.01, 0.0, 0.0);
        sgd_step(model, opt, grads);
        const Vector after = model.flatten_parameters();
        CHECK((after - (before.array() - 0.01 * 0.5).matrix()).cwiseAbs().maxCoeff() < 1e-15);
    }

    SUBCASE("two momentum steps on a constant gradient") {
        // v1 = g, v2 = 1.9 g: total displacement lr*g*(1 + 1.9)
        OptimizerState opt = OptimizerState::make(model, 0.01, 0.9, 0.0);
        sgd_step(model, opt, grads);
        sgd_step(model, opt, grads);
        const Vector after = model.flatten_parameters();
        CHECK((after - (before.array() - 0.01 * 0.5 * 2.9).matrix()).cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("non-finite gradient raises with the layer identified") {
        OptimizerState opt = OptimizerState::make(model, 0.01, 0.9, 0.0);
        grads.dW[1](0, 0) = std::nan("");
        try {
            sgd_step(model, opt, grads);
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
        }
    }

    SUBCASE("optimizer construction validates settings") {
        CHECK_THROWS_AS(OptimizerState::make(model, 0.0, 0.9, 0.0), ConfigError);
        CHECK_THROWS_AS(OptimizerState::make(model, 0.1, 1.0, 0.0), ConfigError);
    }
}

TEST_CASE("checkpoint round trip") {
    Rng rng(10);
    const MlpModel model = MlpModel::init({4, 8, 3}, rng.next_u64());
    const auto dir = std::filesystem::temp_directory_path() / "fer_model_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "model.ckpt").string();

    model.save(path);
    const MlpModel back = MlpModel::load(path);
    CHECK(back.layer_sizes() == model.layer_sizes());
    CHECK(back.seed() == model.seed());
    CHECK(back.flatten_parameters() == model.flatten_parameters());

    // truncated file
    const std::string cut = (dir / "cut.ckpt").string();
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(MlpModel::load(cut), ParseError);

    // wrong magic
    const std::string junk = (dir / "junk.ckpt").string();
    std::ofstream(junk) << "not a checkpoint at all";
    CHECK_THROWS_AS(MlpModel::load(junk), ParseError);

    std::filesystem::remove_all(dir);
}
