#include "fer/metrics.hpp"

#include <fstream>
#include <sstream>

#include "fer/errors.hpp"

namespace fer {

PredictionHistory::PredictionHistory(std::size_t n_eval)
    : n_eval_(n_eval), first_correct_epoch_(n_eval, -1) {}

void PredictionHistory::record_epoch(const std::vector<int>& predictions,
                                     const std::vector<int>& truths) {
    if (predictions.size() != n_eval_ || truths.size() != n_eval_)
        throw ShapeError("record_epoch: prediction/truth length mismatch");
    const int epoch = epoch_count();
    std::vector<bool> column(n_eval_);
    for (std::size_t i = 0; i < n_eval_; ++i) {
        const bool ok = predictions[i] == truths[i];
        column[i] = ok;
        if (ok && first_correct_epoch_[i] < 0) first_correct_epoch_[i] = epoch;
    }
    columns_.push_back(std::move(column));
}

bool PredictionHistory::correct(std::size_t sample, int epoch) const {
    if (sample >= n_eval_) throw std::out_of_range("history: sample out of range");
    if (epoch < 0 || epoch >= epoch_count()) throw std::out_of_range("history: epoch out of range");
    return columns_[static_cast<std::size_t>(epoch)][sample];
}

FlipReport PredictionHistory::flip_report(int at_epoch) const {
    if (at_epoch < 0 || at_epoch >= epoch_count())
        throw std::out_of_range("flip_report: epoch out of range");

    FlipReport r;
    r.epoch = at_epoch;
    r.n_eval = n_eval_;
    const auto& column = columns_[static_cast<std::size_t>(at_epoch)];
    std::size_t n_correct = 0;
    for (std::size_t i = 0; i < n_eval_; ++i) {
        if (column[i]) {
            ++n_correct;
            continue;
        }
        ++r.n_misclassified;
        if (first_correct_epoch_[i] >= 0 && first_correct_epoch_[i] < at_epoch) ++r.n_wfs;
    }
    r.accuracy = n_eval_ == 0 ? 0.0
                              : static_cast<double>(n_correct) / static_cast<double>(n_eval_);
    r.fe = n_eval_ == 0 ? 0.0 : static_cast<double>(r.n_wfs) / static_cast<double>(n_eval_);
    r.rfe = r.n_misclassified == 0
                ? 0.0
                : static_cast<double>(r.n_wfs) / static_cast<double>(r.n_misclassified);
    return r;
}

void PredictionHistory::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ParseError("history: cannot open " + path + " for writing");
    os << "FERHIST 1\n" << n_eval_ << ' ' << epoch_count() << '\n';
    for (std::size_t i = 0; i < n_eval_; ++i) {
        for (int e = 0; e < epoch_count(); ++e)
            os << (columns_[static_cast<std::size_t>(e)][i] ? '1' : '0');
        os << '\n';
    }
    if (!os) throw ParseError("history: write failed for " + path);
}

PredictionHistory PredictionHistory::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("history: cannot open " + path);
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "FERHIST" || version != 1)
        throw ParseError("history: bad header in " + path);
    std::size_t n_eval = 0;
    int epochs = 0;
    if (!(is >> n_eval >> epochs) || epochs < 0)
        throw ParseError("history: bad dimensions in " + path);

    PredictionHistory hist(n_eval);
    std::vector<std::string> rows(n_eval);
    for (std::size_t i = 0; i < n_eval; ++i) {
        if (!(is >> rows[i]) || rows[i].size() != static_cast<std::size_t>(epochs))
            throw ParseError("history: bad row " + std::to_string(i + 1) + " in " + path);
        for (char c : rows[i])
            if (c != '0' && c != '1')
                throw ParseError("history: bad bit in row " + std::to_string(i + 1));
    }
    // Re-feed column by column so the incremental bookkeeping is rebuilt.
    for (int e = 0; e < epochs; ++e) {
        std::vector<int> predictions(n_eval), truths(n_eval, 1);
        for (std::size_t i = 0; i < n_eval; ++i)
            predictions[i] = rows[i][static_cast<std::size_t>(e)] == '1' ? 1 : 0;
        hist.record_epoch(predictions, truths);
    }
    return hist;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& truths) {
    if (predictions.size() != truths.size())
        throw ShapeError("accuracy: prediction/truth length mismatch");
    if (predictions.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == truths[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

} // namespace fer
