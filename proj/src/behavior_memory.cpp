#include "fer/behavior_memory.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fer/errors.hpp"

namespace fer {

namespace {

constexpr char kSnapshotMagic[8] = {'F', 'E', 'R', 'B', 'M', 'E', 'M', '1'};

Eigen::Index argmax_lowest(const Eigen::Ref<const Vector>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

void write_raw(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::istream& is, void* p, std::size_t n, const std::string& what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
        throw ParseError("behavior snapshot: truncated while reading " + what);
}

} // namespace

BehaviorMemory::BehaviorMemory(std::size_t n_samples, Eigen::Index n_classes, double tau,
                               double mu, Options options)
    : entries_(n_samples), n_classes_(n_classes), tau_(tau), mu_(mu), options_(options) {
    if (n_classes < 2) throw ConfigError("behavior memory: need at least 2 classes");
    if (!(tau > 0.0)) throw ConfigError("behavior memory: tau must be positive");
    if (!(mu >= 0.0)) throw ConfigError("behavior memory: mu must be nonnegative");
}

void BehaviorMemory::check_id(std::size_t sample_id) const {
    if (sample_id >= entries_.size())
        throw std::out_of_range("behavior memory: sample id out of range");
}

void BehaviorMemory::fold(BehaviorEntry& e, const Eigen::Ref<const Vector>& logits,
                          Eigen::Index true_class, int epoch) {
    const Vector behavior = softmax_temp(logits, tau_);
    const double confidence = softmax_temp(logits, 1.0)[true_class];
    if (!e.ever_correct || !options_.average) {
        e.b_hat = behavior;
    } else {
        const double keep = std::exp(-mu_ * confidence);
        e.b_hat = keep * e.b_hat + (1.0 - keep) * behavior;
    }
    e.ever_correct = true;
    e.correct_count += 1;
    e.last_update_epoch = epoch;
}

void BehaviorMemory::observe(std::size_t sample_id, const Eigen::Ref<const Vector>& logits,
                             Eigen::Index true_class, int epoch) {
    check_id(sample_id);
    if (logits.size() != n_classes_) throw ShapeError("behavior memory: logit width mismatch");
    if (true_class < 0 || true_class >= n_classes_)
        throw std::out_of_range("behavior memory: class out of range");
    if (argmax_lowest(logits) != true_class) return;
    fold(entries_[sample_id], logits, true_class, epoch);
}

void BehaviorMemory::observe_unconditional(std::size_t sample_id,
                                           const Eigen::Ref<const Vector>& logits,
                                           Eigen::Index true_class, int epoch) {
    if (!options_.unconditional)
        throw ModeError("behavior memory: unconditional updates not enabled");
    check_id(sample_id);
    if (logits.size() != n_classes_) throw ShapeError("behavior memory: logit width mismatch");
    if (true_class < 0 || true_class >= n_classes_)
        throw std::out_of_range("behavior memory: class out of range");
    fold(entries_[sample_id], logits, true_class, epoch);
}

std::optional<Vector> BehaviorMemory::target_for(std::size_t sample_id) const {
    check_id(sample_id);
    const BehaviorEntry& e = entries_[sample_id];
    if (!e.ever_correct) return std::nullopt;
    return e.b_hat;
}

const BehaviorEntry& BehaviorMemory::entry(std::size_t sample_id) const {
    check_id(sample_id);
    return entries_[sample_id];
}

std::size_t BehaviorMemory::flagged_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_)
        if (e.ever_correct) ++n;
    return n;
}

void BehaviorMemory::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("behavior snapshot: cannot open " + path + " for writing");
    write_raw(os, kSnapshotMagic, sizeof(kSnapshotMagic));
    const std::uint64_t n = entries_.size();
    const std::int64_t k = n_classes_;
    write_raw(os, &n, sizeof(n));
    write_raw(os, &k, sizeof(k));
    write_raw(os, &tau_, sizeof(tau_));
    write_raw(os, &mu_, sizeof(mu_));
    const std::uint8_t average = options_.average ? 1 : 0;
    const std::uint8_t unconditional = options_.unconditional ? 1 : 0;
    write_raw(os, &average, sizeof(average));
    write_raw(os, &unconditional, sizeof(unconditional));
    for (const auto& e : entries_) {
        const std::uint8_t flag = e.ever_correct ? 1 : 0;
        const std::int32_t count = e.correct_count;
        const std::int32_t epoch = e.last_update_epoch;
        write_raw(os, &flag, sizeof(flag));
        write_raw(os, &count, sizeof(count));
        write_raw(os, &epoch, sizeof(epoch));
        for (Eigen::Index c = 0; c < n_classes_; ++c) {
            const double v = e.ever_correct ? e.b_hat[c] : 0.0;
            write_raw(os, &v, sizeof(v));
        }
    }
    if (!os) throw ParseError("behavior snapshot: write failed for " + path);
}

BehaviorMemory BehaviorMemory::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("behavior snapshot: cannot open " + path);
    char magic[8];
    read_raw(is, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0)
        throw ParseError("behavior snapshot: bad magic in " + path);

    std::uint64_t n = 0;
    std::int64_t k = 0;
    double tau = 0.0, mu = 0.0;
    std::uint8_t average = 0, unconditional = 0;
    read_raw(is, &n, sizeof(n), "entry count");
    read_raw(is, &k, sizeof(k), "class count");
    read_raw(is, &tau, sizeof(tau), "tau");
    read_raw(is, &mu, sizeof(mu), "mu");
    read_raw(is, &average, sizeof(average), "average flag");
    read_raw(is, &unconditional, sizeof(unconditional), "unconditional flag");

    BehaviorMemory mem(static_cast<std::size_t>(n), static_cast<Eigen::Index>(k), tau, mu,
                       Options{average != 0, unconditional != 0});
    for (std::size_t i = 0; i < n; ++i) {
        const std::string where = "entry " + std::to_string(i);
        std::uint8_t flag = 0;
        std::int32_t count = 0, epoch = 0;
        read_raw(is, &flag, sizeof(flag), where);
        read_raw(is, &count, sizeof(count), where);
        read_raw(is, &epoch, sizeof(epoch), where);
        Vector b(k);
        for (std::int64_t c = 0; c < k; ++c) read_raw(is, &b[c], sizeof(double), where);
        BehaviorEntry& e = mem.entries_[i];
        e.ever_correct = flag != 0;
        e.correct_count = count;
        e.last_update_epoch = epoch;
        if (e.ever_correct) e.b_hat = std::move(b);
    }
    return mem;
}

bool BehaviorMemory::operator==(const BehaviorMemory& other) const {
    if (entries_.size() != other.entries_.size() || n_classes_ != other.n_classes_ ||
        tau_ != other.tau_ || mu_ != other.mu_ ||
        options_.average != other.options_.average ||
        options_.unconditional != other.options_.unconditional)
        return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& a = entries_[i];
        const auto& b = other.entries_[i];
        if (a.ever_correct != b.ever_correct || a.correct_count != b.correct_count ||
            a.last_update_epoch != b.last_update_epoch)
            return false;
        if (a.ever_correct && a.b_hat != b.b_hat) return false;
    }
    return true;
}

} // namespace fer
