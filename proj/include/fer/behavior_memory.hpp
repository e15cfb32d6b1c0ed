#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fer/numerics.hpp"

namespace fer {

/// Per-training-sample record: has the sample ever been observed (flag),
/// how often, when last, and its confidence/recency-weighted behavior average.
struct BehaviorEntry {
    bool ever_correct = false;
    int correct_count = 0;
    int last_update_epoch = -1;
    Vector b_hat; // valid probability vector whenever ever_correct is set
};

struct BehaviorOptions {
    bool average = true;        // false: keep only the most recent behavior
    bool unconditional = false; // allow gate-free updates (noisy-label mode)
};

/// Store of weighted-average correct behaviors, one entry per training sample.
///
/// A behavior is the temperature-softened output distribution of the model on
/// a sample; the average folds each new observation b with weight
/// (1 - exp(-mu*c)) against the history, where c is the untempered probability
/// of the ground-truth class. Higher confidence and later epochs weigh more.
class BehaviorMemory {
public:
    using Options = BehaviorOptions;

    BehaviorMemory(std::size_t n_samples, Eigen::Index n_classes, double tau, double mu,
                   Options options = {});

    /// Fold the sample's behavior iff argmax(logits) equals the true class
    /// (ties break to the lowest class index). Wrong prediction: strict no-op.
    void observe(std::size_t sample_id, const Eigen::Ref<const Vector>& logits,
                 Eigen::Index true_class, int epoch);

    /// Fold every observation regardless of correctness. Only valid when the
    /// memory was built with unconditional updates enabled.
    void observe_unconditional(std::size_t sample_id, const Eigen::Ref<const Vector>& logits,
                               Eigen::Index true_class, int epoch);

    /// Detached copy of the stored average, or absent if nothing was recorded.
    /// Callers must never backpropagate into the returned distribution.
    std::optional<Vector> target_for(std::size_t sample_id) const;

    const BehaviorEntry& entry(std::size_t sample_id) const;

    std::size_t size() const { return entries_.size(); }
    Eigen::Index classes() const { return n_classes_; }
    double tau() const { return tau_; }
    double mu() const { return mu_; }
    const Options& options() const { return options_; }

    /// Count of entries whose flag is set (loss-gate cross-check).
    std::size_t flagged_count() const;

    void save(const std::string& path) const;
    static BehaviorMemory load(const std::string& path);

    bool operator==(const BehaviorMemory& other) const;

private:
    void fold(BehaviorEntry& e, const Eigen::Ref<const Vector>& logits, Eigen::Index true_class,
              int epoch);
    void check_id(std::size_t sample_id) const;

    std::vector<BehaviorEntry> entries_;
    Eigen::Index n_classes_;
    double tau_;
    double mu_;
    Options options_;
};

} // namespace fer
