#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>

#include "fer/errors.hpp"

namespace fer {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Floor for logs and divisions over probabilities. Below float64 round-off
/// interest; keeps every log finite.
inline constexpr double kEpsNum = 1e-12;

namespace detail {

template <typename Derived>
Eigen::ArrayXd as_finite_array(const Eigen::MatrixBase<Derived>& v, const char* what) {
    Eigen::ArrayXd a = v.derived().reshaped().array();
    if (a.size() < 2) throw std::invalid_argument(std::string(what) + ": needs at least 2 classes");
    if (!a.isFinite().all()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
    return a;
}

} // namespace detail

/// Temperature softmax sigma(logits / tau), max-subtracted for stability.
template <typename Derived>
Vector softmax_temp(const Eigen::MatrixBase<Derived>& logits, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("softmax_temp: tau must be positive");
    Eigen::ArrayXd z = detail::as_finite_array(logits, "softmax_temp") / tau;
    Eigen::ArrayXd e = (z - z.maxCoeff()).exp();
    return (e / e.sum()).matrix();
}

/// log(softmax_temp(logits, tau)) via log-sum-exp; never forms the ratio.
template <typename Derived>
Vector log_softmax_temp(const Eigen::MatrixBase<Derived>& logits, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("log_softmax_temp: tau must be positive");
    Eigen::ArrayXd z = detail::as_finite_array(logits, "log_softmax_temp") / tau;
    const double m = z.maxCoeff();
    const double lse = m + std::log((z - m).exp().sum());
    return (z - lse).matrix();
}

/// -log pred[target_class], pred floored at kEpsNum.
inline double cross_entropy(const Eigen::Ref<const Vector>& pred, Eigen::Index target_class) {
    if (target_class < 0 || target_class >= pred.size())
        throw std::out_of_range("cross_entropy: target class out of range");
    return -std::log(std::max(pred[target_class], kEpsNum));
}

/// KL(target || model) = sum_c target_c (ln target_c - ln model_c).
/// Terms with target_c == 0 contribute nothing; model entries floored at kEpsNum.
inline double kl_divergence(const Eigen::Ref<const Vector>& target,
                            const Eigen::Ref<const Vector>& model) {
    if (target.size() != model.size()) throw ShapeError("kl_divergence: dimension mismatch");
    double acc = 0.0;
    for (Eigen::Index c = 0; c < target.size(); ++c) {
        const double t = target[c];
        if (t > 0.0) acc += t * (std::log(t) - std::log(std::max(model[c], kEpsNum)));
    }
    // KL is nonnegative; guard float rounding near equal inputs.
    return std::max(acc, 0.0);
}

/// Shannon entropy -sum p ln p with 0 ln 0 := 0.
inline double entropy(const Eigen::Ref<const Vector>& p) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < p.size(); ++c)
        if (p[c] > 0.0) acc -= p[c] * std::log(p[c]);
    return std::max(acc, 0.0);
}

/// Central-difference check of an analytic gradient at `point`.
/// Returns max over entries of |analytic - numeric| / max(1, |numeric|).
inline double finite_diff_check(const std::function<double(const Vector&)>& fn,
                                const Eigen::Ref<const Vector>& analytic_grad,
                                const Eigen::Ref<const Vector>& point, double h) {
    if (!(h >= 1e-7 && h <= 1e-3))
        throw std::invalid_argument("finite_diff_check: h must be in [1e-7, 1e-3]");
    if (analytic_grad.size() != point.size())
        throw ShapeError("finite_diff_check: gradient/point size mismatch");
    double worst = 0.0;
    Vector x = point;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = fn(x);
        x[i] = saved - h;
        const double fm = fn(x);
        x[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("finite_diff_check: non-finite function value");
        const double numeric = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic_grad[i] - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace fer
