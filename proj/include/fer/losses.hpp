#pragma once

#include <optional>
#include <string>
#include <utility>

#include "fer/numerics.hpp"

namespace fer {

enum class Method { Std, Fer, Lsr, MaxEnt };

Method method_from_string(const std::string& name);
std::string method_name(Method m);

/// Training-objective selection plus every hyperparameter the objectives read.
struct LossSpec {
    Method method = Method::Std;

    // FER
    double tau = 5.0;          // behavior temperature
    double mu = 1.0;           // confidence scale in the behavior average
    int total_epochs = 1;      // M in the alpha/beta schedule
    double rho = 0.9;          // final regularizer weight
    bool no_gate = false;      // ablation: regularize every sample (S1 off)
    bool no_average = false;   // ablation: most recent behavior only (S2 off)
    bool noisy_mode = false;   // corrupted-label variant: gate-free updates
    bool kl_model_first = false;     // KL(model || target) instead of KL(target || model)
    bool tau_squared_scale = false;  // multiply the KL term by tau^2

    // LSR
    double epsilon = 0.1;

    // Max-Entropy
    double lambda = 0.5;

    void validate() const;
    bool unconditional_updates() const { return no_gate || noisy_mode; }
};

/// One sample's loss value, its gradient w.r.t. the logits, and the
/// cross-entropy / regularizer breakdown (reg: weighted KL for FER,
/// -lambda*entropy for Max-Entropy, 0 otherwise).
struct PerSampleLoss {
    double value = 0.0;
    Vector dlogits;
    double ce = 0.0;
    double reg = 0.0;
};

/// Balancing weights at epoch k of M: alpha = 1 - rho*k/M, beta = rho*k/M.
std::pair<double, double> alpha_beta(int epoch, int total_epochs, double rho = 0.9);

/// Plain cross-entropy against the one-hot label.
PerSampleLoss std_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class);

/// Gated composite objective: with a recorded behavior target,
/// alpha*CE + beta*KL(target || softmax(logits/tau)); without one, std_loss.
/// No gradient flows into the target.
PerSampleLoss fer_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class,
                       const std::optional<Vector>& target, int epoch, const LossSpec& spec);

/// Cross-entropy against (1-epsilon)*one_hot + epsilon/K.
PerSampleLoss lsr_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class,
                       double epsilon);

/// Confidence penalty: CE - lambda * entropy(softmax(logits)).
PerSampleLoss maxent_loss(const Eigen::Ref<const Vector>& logits, Eigen::Index true_class,
                          double lambda);

} // namespace fer
