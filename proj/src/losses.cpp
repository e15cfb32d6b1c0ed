#include "fer/losses.hpp"

#include <cmath>

#include "fer/errors.hpp"

namespace fer {

Method method_from_string(const std::string& name) {
    if (name == "std") return Method::Std;
    if (name == "fer") return Method::Fer;
    if (name == "lsr") return Method::Lsr;
    if (name == "maxent") return Method::MaxEnt;
    throw ConfigError("unknown method '" + name + "' (expected std|fer|lsr|maxent)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Std: return "std";
        case Method::Fer: return "fer";
        case Method::Lsr: return "lsr";
        case Method::MaxEnt: return "maxent";
    }
    return "?";
}

void LossSpec::validate() const {
    if (!(tau > 0.0)) throw ConfigError("loss spec: tau must be positive");
    if (!(mu >= 0.0)) throw ConfigError("loss spec: mu must be nonnegative");
    if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("loss spec: epsilon in [0,1)");
    if (!(lambda >= 0.0)) throw ConfigError("loss spec: lambda must be nonnegative");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("loss spec: rho in [0,1]");
    if (total_epochs < 1) throw ConfigError("loss spec: total epochs must be >= 1");
}

std::pair<double, double> alpha_beta(int epoch, int total_epochs, double rho) {
    if (total_epochs < 1) throw std::invalid_argument("alpha_beta: total epochs must be >= 1");
    if (epoch < 0 || epoch > total_epochs)
        throw std::invalid_argument("alpha_beta: epoch outside [0, total_epochs]");
    const double beta = rho * static_cast<double>(epoch) / static_cast<double>(total_epochs);
    return {1.0 - beta, beta};
}

PerSampleLoss std_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class) {
    const Vector p = softmax_temp(logits, 1.0);
    if (true_class < 0 || true_class >= p.size())
        throw std::out_of_range("std_loss: class out of range");
    PerSampleLoss out;
    out.ce = cross_entropy(p, true_class);
    out.value = out.ce;
    out.dlogits = p;
    out.dlogits[true_class] -= 1.0;
    return out;
}

PerSampleLoss fer_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class,
                       const std::optional<Vector>& target, int epoch, const LossSpec& spec) {
    if (!target) return std_loss(logits, true_class);

    const Vector& q = *target;
    if (q.size() != logits.size()) throw ShapeError("fer_loss: target width mismatch");
    if ((q.array() < 0.0).any() || std::abs(q.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("fer_loss: target is not a probability vector");

    const auto [alpha, beta] = alpha_beta(epoch, spec.total_epochs, spec.rho);

    const Vector p1 = softmax_temp(logits, 1.0);
    if (true_class < 0 || true_class >= p1.size())
        throw std::out_of_range("fer_loss: class out of range");
    const double ce = cross_entropy(p1, true_class);

    const Vector pt = softmax_temp(logits, spec.tau);
    double kl;
    Vector dkl(logits.size());
    if (!spec.kl_model_first) {
        // KL(q || p_tau); only p_tau carries gradient: d/dz = (p_tau - q)/tau.
        kl = kl_divergence(q, pt);
        dkl = (pt - q) / spec.tau;
    } else {
        // KL(p_tau || q) with q detached:
        // d/dz_i = (p_i/tau) * (g_i - sum_c p_c g_c), g = ln p_tau - ln q.
        kl = kl_divergence(pt, q);
        Vector g(logits.size());
        for (Eigen::Index c = 0; c < g.size(); ++c)
            g[c] = std::log(std::max(pt[c], kEpsNum)) - std::log(std::max(q[c], kEpsNum));
        const double mean_g = pt.dot(g);
        dkl = pt.cwiseProduct(g.array().matrix() - Vector::Constant(g.size(), mean_g)) / spec.tau;
    }
    const double kl_scale = spec.tau_squared_scale ? spec.tau * spec.tau : 1.0;

    PerSampleLoss out;
    out.ce = ce;
    out.reg = beta * kl_scale * kl;
    out.value = alpha * ce + out.reg;
    out.dlogits = p1;
    out.dlogits[true_class] -= 1.0;
    out.dlogits = alpha * out.dlogits + (beta * kl_scale) * dkl;
    return out;
}

PerSampleLoss lsr_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class,
                       double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw std::invalid_argument("lsr_loss: epsilon must be in [0,1)");
    const Vector p = softmax_temp(logits, 1.0);
    if (true_class < 0 || true_class >= p.size())
        throw std::out_of_range("lsr_loss: class out of range");
    const Eigen::Index k = p.size();

    Vector smoothed = Vector::Constant(k, epsilon / static_cast<double>(k));
    smoothed[true_class] += 1.0 - epsilon;

    PerSampleLoss out;
    double value = 0.0;
    for (Eigen::Index c = 0; c < k; ++c)
        value += smoothed[c] * (-std::log(std::max(p[c], kEpsNum)));
    out.value = value;
    out.ce = value;
    out.dlogits = p - smoothed;
    return out;
}

PerSampleLoss maxent_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class,
                          double lambda) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("maxent_loss: lambda must be nonnegative");
    const Vector p = softmax_temp(logits, 1.0);
    if (true_class < 0 || true_class >= p.size())
        throw std::out_of_range("maxent_loss: class out of range");

    const double h = entropy(p);
    PerSampleLoss out;
    out.ce = cross_entropy(p, true_class);
    out.reg = -lambda * h;
    out.value = out.ce + out.reg;

    // d(-H)/dz_i = p_i * (ln p_i + H)
    Vector dneg_h(p.size());
    for (Eigen::Index c = 0; c < p.size(); ++c)
        dneg_h[c] = p[c] * (std::log(std::max(p[c], kEpsNum)) + h);

    out.dlogits = p;
    out.dlogits[true_class] -= 1.0;
    out.dlogits += lambda * dneg_h;
    return out;
}

} // namespace fer
