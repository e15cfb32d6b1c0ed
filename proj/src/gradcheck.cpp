#include "fer/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <optional>

#include "fer/losses.hpp"
#include "fer/model.hpp"
#include "fer/numerics.hpp"
#include "fer/rng.hpp"

namespace fer {

namespace {

constexpr double kStep = 1e-5;

Vector random_logits(Rng& rng, Eigen::Index k) {
    Vector v(k);
    for (Eigen::Index i = 0; i < k; ++i) v[i] = rng.uniform(-3.0, 3.0);
    return v;
}

Vector random_distribution(Rng& rng, Eigen::Index k) {
    return softmax_temp(random_logits(rng, k), 1.0);
}

using LossFn = std::function<PerSampleLoss(const Vector&)>;

double check_logit_gradient(Rng& rng, const LossFn& loss, int points) {
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.index(7));
        const Vector logits = random_logits(rng, k);
        const PerSampleLoss at = loss(logits);
        const double err = finite_diff_check(
            [&](const Vector& x) { return loss(x).value; }, at.dlogits, logits, kStep);
        worst = std::max(worst, err);
    }
    return worst;
}

/// Batch-mean loss through the whole network, gradient via backward() vs
/// central differences over the flattened parameters.
double check_model_gradient(Rng& rng, Method method, const LossSpec& spec) {
    const Eigen::Index d = 3, k = 4;
    const std::vector<Eigen::Index> sizes = {d, 8, 8, k};
    MlpModel model = MlpModel::init(sizes, rng.next_u64());

    const Eigen::Index batch_n = 5;
    Matrix batch(batch_n, d);
    std::vector<int> labels(static_cast<std::size_t>(batch_n));
    std::vector<std::optional<Vector>> targets(static_cast<std::size_t>(batch_n));
    for (Eigen::Index i = 0; i < batch_n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) batch(i, j) = rng.uniform(-2.0, 2.0);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
        if (method == Method::Fer && rng.uniform() < 0.7)
            targets[static_cast<std::size_t>(i)] = random_distribution(rng, k);
    }
    const int epoch = static_cast<int>(rng.index(static_cast<std::size_t>(spec.total_epochs) + 1));

    auto per_sample = [&](const Vector& logits, std::size_t i) -> PerSampleLoss {
        switch (method) {
            case Method::Std: return std_loss(logits, labels[i]);
            case Method::Lsr: return lsr_loss(logits, labels[i], spec.epsilon);
            case Method::MaxEnt: return maxent_loss(logits, labels[i], spec.lambda);
            case Method::Fer: return fer_loss(logits, labels[i], targets[i], epoch, spec);
        }
        return {};
    };

    auto batch_loss = [&](const MlpModel& m) {
        const BatchOutput fwd = forward(m, batch);
        double total = 0.0;
        for (Eigen::Index i = 0; i < batch_n; ++i)
            total += per_sample(fwd.logits.row(i).transpose(), static_cast<std::size_t>(i)).value;
        return total / static_cast<double>(batch_n);
    };

    const BatchOutput fwd = forward(model, batch);
    Matrix dlogits(batch_n, k);
    for (Eigen::Index i = 0; i < batch_n; ++i)
        dlogits.row(i) =
            per_sample(fwd.logits.row(i).transpose(), static_cast<std::size_t>(i)).dlogits.transpose();
    const Vector analytic = flatten_gradients(backward(model, fwd, dlogits));

    const Vector point = model.flatten_parameters();
    MlpModel scratch = model;
    return finite_diff_check(
        [&](const Vector& params) {
            scratch.set_parameters(params);
            return batch_loss(scratch);
        },
        analytic, point, kStep);
}

} // namespace

GradCheckReport run_gradient_checks(std::uint64_t seed, int points_per_loss) {
    Rng rng(seed);
    GradCheckReport report;
    auto add = [&](std::string name, double err) {
        report.checks.push_back({std::move(name), err});
        report.max_rel_error = std::max(report.max_rel_error, err);
    };

    add("std_loss/dlogits", check_logit_gradient(
                                rng, [&](const Vector& z) { return std_loss(z, 0); }, points_per_loss));

    for (double eps : {0.0, 0.1, 0.3})
        add("lsr_loss(eps=" + std::to_string(eps) + ")/dlogits",
            check_logit_gradient(
                rng, [&](const Vector& z) { return lsr_loss(z, 0, eps); }, points_per_loss));

    for (double lambda : {0.0, 0.5, 1.5})
        add("maxent_loss(lambda=" + std::to_string(lambda) + ")/dlogits",
            check_logit_gradient(
                rng, [&](const Vector& z) { return maxent_loss(z, 0, lambda); }, points_per_loss));

    for (double tau : {1.0, 5.0, 10.0}) {
        for (bool model_first : {false, true}) {
            LossSpec spec;
            spec.method = Method::Fer;
            spec.tau = tau;
            spec.total_epochs = 10;
            spec.kl_model_first = model_first;
            double worst = 0.0;
            for (int p = 0; p < points_per_loss; ++p) {
                const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.index(7));
                const std::optional<Vector> target = random_distribution(rng, k);
                const int epoch = static_cast<int>(rng.index(11));
                const Vector logits = random_logits(rng, k);
                const PerSampleLoss at = fer_loss(logits, 0, target, epoch, spec);
                worst = std::max(
                    worst, finite_diff_check(
                               [&](const Vector& z) { return fer_loss(z, 0, target, epoch, spec).value; },
                               at.dlogits, logits, kStep));
            }
            add("fer_loss(tau=" + std::to_string(tau) +
                    (model_first ? ",kl_model_first" : "") + ")/dlogits",
                worst);
        }
    }

    {
        LossSpec spec;
        spec.method = Method::Fer;
        spec.tau = 5.0;
        spec.total_epochs = 10;
        spec.tau_squared_scale = true;
        const std::optional<Vector> target = random_distribution(rng, 4);
        const Vector logits = random_logits(rng, 4);
        const PerSampleLoss at = fer_loss(logits, 1, target, 7, spec);
        add("fer_loss(tau2_scale)/dlogits",
            finite_diff_check(
                [&](const Vector& z) { return fer_loss(z, 1, target, 7, spec).value; }, at.dlogits,
                logits, kStep));
    }

    const int model_rounds = std::max(1, points_per_loss / 10);
    for (int r = 0; r < model_rounds; ++r) {
        LossSpec spec;
        spec.total_epochs = 10;
        add("backward/std", check_model_gradient(rng, Method::Std, spec));
        add("backward/lsr", check_model_gradient(rng, Method::Lsr, spec));
        add("backward/maxent", check_model_gradient(rng, Method::MaxEnt, spec));
        spec.method = Method::Fer;
        spec.tau = 5.0;
        add("backward/fer", check_model_gradient(rng, Method::Fer, spec));
    }
    return report;
}

} // namespace fer
