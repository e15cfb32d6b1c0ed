#pragma once

#include <string>
#include <vector>

namespace fer {

/// Flip statistics at one epoch. A wrongly flipped sample (WFS) is wrong at
/// `epoch` but was correct in at least one earlier epoch.
struct FlipReport {
    int epoch = 0;
    std::size_t n_eval = 0;
    std::size_t n_misclassified = 0; // MTS
    std::size_t n_wfs = 0;           // WFS
    double fe = 0.0;                 // WFS / n_eval
    double rfe = 0.0;                // WFS / MTS, 0 when MTS == 0
    double accuracy = 0.0;
};

/// Per-evaluation-sample, per-epoch correctness bits, appended one epoch at a
/// time in strictly increasing epoch order.
class PredictionHistory {
public:
    explicit PredictionHistory(std::size_t n_eval);

    void record_epoch(const std::vector<int>& predictions, const std::vector<int>& truths);

    int epoch_count() const { return static_cast<int>(columns_.size()); }
    std::size_t sample_count() const { return n_eval_; }
    bool correct(std::size_t sample, int epoch) const;

    FlipReport flip_report(int at_epoch) const;

    void save(const std::string& path) const;
    static PredictionHistory load(const std::string& path);

private:
    std::size_t n_eval_;
    std::vector<std::vector<bool>> columns_; // one packed column per epoch
    std::vector<int> first_correct_epoch_;   // -1 until first correct epoch
};

/// Fraction of exact matches.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& truths);

} // namespace fer
