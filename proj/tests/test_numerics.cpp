#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fer/numerics.hpp"
#include "fer/rng.hpp"

using namespace fer;

namespace {

Vector logits_of(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Vector random_logits(Rng& rng, Eigen::Index k, double lo = -50.0, double hi = 50.0) {
    Vector v(k);
    for (Eigen::Index i = 0; i < k; ++i) v[i] = rng.uniform(lo, hi);
    return v;
}

} // namespace

TEST_CASE("softmax_temp closed forms") {
    const Vector uniform = softmax_temp(logits_of({0.0, 0.0}), 5.0);
    CHECK(uniform[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(uniform[1] == doctest::Approx(0.5).epsilon(1e-12));

    const Vector p = softmax_temp(logits_of({std::log(2.0), 0.0}), 1.0);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // tau -> infinity flattens towards uniform
    const Vector flat = softmax_temp(logits_of({10.0, -10.0}), 1e6);
    CHECK(std::abs(flat[0] - 0.5) < 1e-5);
    CHECK(std::abs(flat[1] - 0.5) < 1e-5);
}

TEST_CASE("softmax_temp rejects bad input") {
    CHECK_THROWS_AS(softmax_temp(logits_of({0.0, 0.0}), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_temp(logits_of({0.0, 0.0}), -1.0), std::invalid_argument);
    CHECK_THROWS_AS(softmax_temp(logits_of({std::nan(""), 0.0}), 1.0), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(softmax_temp(logits_of({inf, 0.0}), 1.0), std::invalid_argument);
}

TEST_CASE("log_softmax_temp closed forms and stability") {
    const Vector ls = log_softmax_temp(logits_of({0.0, 0.0}), 1.0);
    CHECK(ls[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    CHECK(ls[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

    const Vector ls2 = log_softmax_temp(logits_of({std::log(2.0), 0.0}), 1.0);
    CHECK(ls2[0] == doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-12));
    CHECK(ls2[1] == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-12));

    // no overflow on extreme logits; dominant entry's log-prob is ~0
    const Vector big = log_softmax_temp(logits_of({1000.0, 0.0}), 1.0);
    CHECK(big.allFinite());
    CHECK(std::abs(big[0]) < 1e-12);
    CHECK(big[1] == doctest::Approx(-1000.0).epsilon(1e-12));
}

TEST_CASE("cross_entropy closed forms") {
    CHECK(cross_entropy(logits_of({0.0, 1.0}), 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cross_entropy(logits_of({0.5, 0.5}), 0) == doctest::Approx(0.6931471805599453));
    CHECK(cross_entropy(logits_of({2.0 / 3.0, 1.0 / 3.0}), 1) ==
          doctest::Approx(1.0986122886681098));
    CHECK_THROWS_AS(cross_entropy(logits_of({0.5, 0.5}), 2), std::out_of_range);
    CHECK_THROWS_AS(cross_entropy(logits_of({0.5, 0.5}), -1), std::out_of_range);
}

TEST_CASE("kl_divergence closed forms") {
    const Vector p = logits_of({0.75, 0.25});
    const Vector u = logits_of({0.5, 0.5});
    CHECK(kl_divergence(p, p) == 0.0);
    CHECK(kl_divergence(p, u) == doctest::Approx(0.13081203594113697).epsilon(1e-9));
    CHECK(kl_divergence(logits_of({1.0, 0.0}), u) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(kl_divergence(p, logits_of({0.2, 0.3, 0.5})), ShapeError);
}

TEST_CASE("entropy closed forms") {
    CHECK(entropy(logits_of({1.0, 0.0, 0.0})) == 0.0);
    CHECK(entropy(logits_of({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(std::log(4.0)));
    CHECK(entropy(logits_of({0.75, 0.25})) == doctest::Approx(0.5623351446188083).epsilon(1e-9));
}

TEST_CASE("finite_diff_check calibration") {
    // polynomial: essentially exact
    const Vector x0 = logits_of({3.0});
    const auto square = [](const Vector& x) { return x[0] * x[0]; };
    CHECK(finite_diff_check(square, logits_of({6.0}), x0, 1e-5) < 1e-8);

    // cross_entropy(softmax(z)) with its analytic gradient
    Rng rng(42);
    const Vector z = random_logits(rng, 4, -3.0, 3.0);
    const auto fn = [](const Vector& v) { return cross_entropy(softmax_temp(v, 1.0), 2); };
    Vector grad = softmax_temp(z, 1.0);
    grad[2] -= 1.0;
    CHECK(finite_diff_check(fn, grad, z, 1e-5) < 1e-5);

    // an injected 1% fault is detected
    const double err = finite_diff_check(fn, 1.01 * grad, z, 1e-5);
    CHECK(err > 1e-3);

    CHECK_THROWS_AS(finite_diff_check(square, logits_of({6.0}), x0, 1e-2), std::invalid_argument);
    const auto bad = [](const Vector&) { return std::nan(""); };
    CHECK_THROWS_AS(finite_diff_check(bad, logits_of({6.0}), x0, 1e-5), NumericError);
}

TEST_CASE("softmax invariants on random logits") {
    Rng rng(1);
    for (double tau : {0.1, 1.0, 5.0, 10.0}) {
        for (int round = 0; round < 50; ++round) {
            const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.index(9));
            const Vector z = random_logits(rng, k);
            const Vector p = softmax_temp(z, tau);
            CHECK(std::abs(p.sum() - 1.0) <= 1e-9);
            CHECK((p.array() >= 0.0).all());

            // temperature folds into the logits
            const Vector alt = softmax_temp((z / tau).eval(), 1.0);
            CHECK((p - alt).cwiseAbs().maxCoeff() <= 1e-12);

            // shift invariance
            const double c = rng.uniform(-100.0, 100.0);
            const Vector shifted = softmax_temp((z.array() + c).matrix().eval(), tau);
            CHECK((p - shifted).cwiseAbs().maxCoeff() <= 1e-12);

            // exp(log_softmax) == softmax
            const Vector ls = log_softmax_temp(z, tau);
            CHECK((ls.array().exp().matrix() - p).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("kl nonnegativity (Gibbs) on random distributions") {
    Rng rng(2);
    for (int round = 0; round < 200; ++round) {
        const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.index(9));
        const Vector a = softmax_temp(random_logits(rng, k, -5.0, 5.0), 1.0);
        const Vector b = softmax_temp(random_logits(rng, k, -5.0, 5.0), 1.0);
        const double kl = kl_divergence(a, b);
        CHECK(kl >= 0.0);
        if ((a - b).cwiseAbs().maxCoeff() > 1e-6) CHECK(kl > 0.0);
        CHECK(kl_divergence(a, a) == 0.0);
    }
}

TEST_CASE("gradients of composed losses match finite differences") {
    Rng rng(3);
    for (int round = 0; round < 100; ++round) {
        const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.index(7));
        const double tau = 0.5 + rng.uniform() * 9.5;
        const Vector z = random_logits(rng, k, -3.0, 3.0);
        const auto target_class = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(k)));

        // d/dz CE(softmax(z, tau), t) = (softmax(z, tau) - onehot) / tau
        Vector grad_ce = softmax_temp(z, tau) / tau;
        grad_ce[target_class] -= 1.0 / tau;
        const double err_ce = finite_diff_check(
            [&](const Vector& v) { return cross_entropy(softmax_temp(v, tau), target_class); },
            grad_ce, z, 1e-5);
        CHECK(err_ce <= 1e-5);

        // d/dz KL(q || softmax(z, tau)) = (softmax(z, tau) - q) / tau
        const Vector q = softmax_temp(random_logits(rng, k, -3.0, 3.0), 1.0);
        const Vector grad_kl = (softmax_temp(z, tau) - q) / tau;
        const double err_kl = finite_diff_check(
            [&](const Vector& v) { return kl_divergence(q, softmax_temp(v, tau)); }, grad_kl, z,
            1e-5);
        CHECK(err_kl <= 1e-5);
    }
}
