#include "fer/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fer/errors.hpp"
#include "fer/losses.hpp"
#include "fer/rng.hpp"

namespace fer {

namespace {

// Salts for deriving independent deterministic streams from one run seed.
constexpr std::uint64_t kInitSalt = 0x11;
constexpr std::uint64_t kShuffleSalt = 0x22;
constexpr std::uint64_t kNoiseSalt = 0x33;
constexpr std::uint64_t kBlobsSalt = 0x44;

Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

double learning_rate_at(const ExperimentConfig& cfg, int epoch) {
    double lr = cfg.learning_rate;
    for (double frac : cfg.lr_milestones) {
        const int milestone = static_cast<int>(std::floor(frac * cfg.epochs));
        if (epoch >= milestone && milestone > 0) lr *= cfg.lr_gamma;
    }
    return lr;
}

std::string format_jsonl(const EpochRecord& r, bool has_val) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["train_loss"] = r.train_loss;
    j["train_accuracy"] = r.train_accuracy;
    j["eval_accuracy"] = r.eval_accuracy;
    if (has_val) j["val_accuracy"] = r.val_accuracy;
    j["fe"] = r.fe;
    j["rfe"] = r.rfe;
    j["wfs_count"] = r.wfs_count;
    j["alpha"] = r.alpha;
    j["beta"] = r.beta;
    return j.dump();
}

} // namespace

std::vector<int> predict_classes(const MlpModel& model, const Eigen::Ref<const Matrix>& features) {
    std::vector<int> out(static_cast<std::size_t>(features.rows()));
    if (features.rows() == 0) return out;
    const BatchOutput fwd = forward(model, features);
    for (Eigen::Index i = 0; i < fwd.logits.rows(); ++i)
        out[static_cast<std::size_t>(i)] = static_cast<int>(argmax_lowest(fwd.logits.row(i)));
    return out;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

std::string resolve_output_dir(const std::string& dir) {
    if (dir.empty()) return dir;
    const char* root = std::getenv("FER_OUTPUT_ROOT");
    std::filesystem::path p(dir);
    if (root && *root && p.is_relative()) p = std::filesystem::path(root) / p;
    return p.string();
}

Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed) {
    Dataset ds;
    bool pre_split = false;
    if (cfg.data_source == "blobs") {
        ds = make_blobs(cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_dim,
                        cfg.blobs_separation, mix_seed(cfg.blobs_seed, mix_seed(run_seed, kBlobsSalt)));
    } else if (!cfg.data_test_path.empty()) {
        ds = load_pair(cfg.data_path, cfg.data_test_path, cfg.schema);
        pre_split = true;
    } else {
        ds = load_delimited(cfg.data_path, cfg.schema);
    }

    if (!pre_split) {
        const std::uint64_t split_seed =
            cfg.split_seed >= 0 ? static_cast<std::uint64_t>(cfg.split_seed) : run_seed;
        ds = split(std::move(ds), cfg.train_frac, cfg.val_frac, cfg.test_frac, split_seed);
    }
    if (cfg.standardize_features) ds = standardize(std::move(ds));
    if (cfg.noise_enabled) {
        NoiseSpec spec;
        spec.rate = cfg.noise_rate;
        spec.seed = cfg.noise_seed >= 0 ? static_cast<std::uint64_t>(cfg.noise_seed)
                                        : mix_seed(run_seed, kNoiseSalt);
        spec.exclude_true_class = cfg.noise_exclude_true;
        ds = inject_noise(std::move(ds), spec);
    }
    return ds;
}

namespace {

struct SeedArtifacts {
    Dataset dataset;
    MlpModel model;
    bool has_memory = false;
    BehaviorMemory memory{1, 2, 1.0, 1.0};
    PredictionHistory test_history{0};
};

SeedResult run_seed_impl(const ExperimentConfig& cfg, std::uint64_t seed, SeedArtifacts* keep) {
    const LossSpec spec = [&] {
        LossSpec s = cfg.loss;
        s.total_epochs = cfg.epochs;
        return s;
    }();

    Dataset ds = build_dataset(cfg, seed);
    const Matrix x_train = ds.rows(ds.train_idx);
    const std::vector<int> y_train = ds.labels_at(ds.train_idx);
    const Matrix x_val = ds.rows(ds.val_idx);
    const std::vector<int> y_val = ds.labels_at(ds.val_idx);
    const Matrix x_test = ds.rows(ds.test_idx);
    const std::vector<int> y_test = ds.labels_at(ds.test_idx);
    const std::size_t n_train = ds.train_idx.size();
    if (n_train == 0) throw ConfigError("run: empty train split");
    if (ds.test_idx.empty()) throw ConfigError("run: empty test split");
    const bool has_val = !ds.val_idx.empty();

    std::vector<Eigen::Index> layer_sizes;
    layer_sizes.push_back(ds.dim());
    for (int h : cfg.hidden_sizes) layer_sizes.push_back(h);
    layer_sizes.push_back(ds.class_count);

    MlpModel model = MlpModel::init(layer_sizes, mix_seed(seed, kInitSalt));
    OptimizerState opt =
        OptimizerState::make(model, cfg.learning_rate, cfg.momentum, cfg.weight_decay);

    const bool use_memory = spec.method == Method::Fer;
    BehaviorMemory memory(use_memory ? n_train : 1, ds.class_count, spec.tau, spec.mu,
                          BehaviorMemory::Options{!spec.no_average, spec.unconditional_updates()});

    PredictionHistory test_history(ds.test_idx.size());

    SeedResult result;
    result.seed = seed;
    std::ostringstream stream;

    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        opt.learning_rate = learning_rate_at(cfg, epoch);

        Rng shuffle_rng(mix_seed(mix_seed(seed, kShuffleSalt), static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t train_hits = 0;
        std::size_t cor_uses = 0;
        std::size_t flagged_seen = 0;

        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
            const auto batch_n = static_cast<Eigen::Index>(stop - start);

            Matrix batch(batch_n, ds.dim());
            for (Eigen::Index i = 0; i < batch_n; ++i)
                batch.row(i) = x_train.row(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(i)]));

            const BatchOutput fwd = forward(model, batch);
            if (!fwd.logits.allFinite())
                throw NumericError("run: non-finite logits at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / cfg.batch_size) +
                                   " (diverged training?)");
            Matrix dlogits(batch_n, ds.class_count);

            for (Eigen::Index i = 0; i < batch_n; ++i) {
                const std::size_t sample = order[start + static_cast<std::size_t>(i)];
                const int label = y_train[sample];
                const Vector logits = fwd.logits.row(i).transpose();

                PerSampleLoss pl;
                switch (spec.method) {
                    case Method::Std:
                        pl = std_loss(logits, label);
                        break;
                    case Method::Lsr:
                        pl = lsr_loss(logits, label, spec.epsilon);
                        break;
                    case Method::MaxEnt:
                        pl = maxent_loss(logits, label, spec.lambda);
                        break;
                    case Method::Fer: {
                        if (memory.entry(sample).ever_correct) ++flagged_seen;
                        const auto target = memory.target_for(sample);
                        if (target) ++cor_uses;
                        pl = fer_loss(logits, label, target, epoch, spec);
                        break;
                    }
                }
                if (!std::isfinite(pl.value) || !pl.dlogits.allFinite())
                    throw NumericError("run: non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(start / cfg.batch_size) +
                                       ", sample " + std::to_string(sample));
                loss_sum += pl.value;
                dlogits.row(i) = pl.dlogits.transpose();
                if (argmax_lowest(fwd.logits.row(i)) == label) ++train_hits;
            }

            // Behavior capture uses this batch's pre-update outputs and runs
            // after the batch's losses were formed.
            if (use_memory) {
                for (Eigen::Index i = 0; i < batch_n; ++i) {
                    const std::size_t sample = order[start + static_cast<std::size_t>(i)];
                    const Vector logits = fwd.logits.row(i).transpose();
                    if (spec.unconditional_updates())
                        memory.observe_unconditional(sample, logits, y_train[sample], epoch);
                    else
                        memory.observe(sample, logits, y_train[sample], epoch);
                }
            }

            const GradientSet grads = backward(model, fwd, dlogits);
            sgd_step(model, opt, grads);
        }

        const std::vector<int> test_pred = predict_classes(model, x_test);
        test_history.record_epoch(test_pred, y_test);
        const FlipReport flips = test_history.flip_report(epoch);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n_train);
        rec.train_accuracy = static_cast<double>(train_hits) / static_cast<double>(n_train);
        rec.eval_accuracy = flips.accuracy;
        if (has_val) rec.val_accuracy = accuracy(predict_classes(model, x_val), y_val);
        rec.fe = flips.fe;
        rec.rfe = flips.rfe;
        rec.wfs_count = static_cast<int>(flips.n_wfs);
        std::tie(rec.alpha, rec.beta) = alpha_beta(epoch, cfg.epochs, spec.rho);
        rec.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.cor_branch_uses = cor_uses;
        rec.flagged_at_loss = flagged_seen;

        stream << format_jsonl(rec, has_val) << '\n';
        result.records.push_back(std::move(rec));
    }

    // Best epoch by validation accuracy, ties to the earlier epoch; without a
    // validation split the last epoch is the selected one.
    int best_epoch = cfg.epochs - 1;
    if (has_val) {
        best_epoch = 0;
        for (int e = 1; e < cfg.epochs; ++e)
            if (result.records[static_cast<std::size_t>(e)].val_accuracy >
                result.records[static_cast<std::size_t>(best_epoch)].val_accuracy)
                best_epoch = e;
    }
    result.best_epoch = best_epoch;
    result.final_report = test_history.flip_report(cfg.epochs - 1);
    result.best_report = test_history.flip_report(best_epoch);
    result.final_test_accuracy = result.final_report.accuracy;
    result.best_test_accuracy = result.best_report.accuracy;
    result.metrics_stream = stream.str();

    if (keep) {
        keep->dataset = std::move(ds);
        keep->model = std::move(model);
        keep->has_memory = use_memory;
        if (use_memory) keep->memory = std::move(memory);
        keep->test_history = std::move(test_history);
    }
    return result;
}

void write_flip_json(const std::string& path, const SeedResult& r) {
    auto report_json = [](const FlipReport& f) {
        nlohmann::ordered_json j;
        j["epoch"] = f.epoch;
        j["n_eval"] = f.n_eval;
        j["mts"] = f.n_misclassified;
        j["wfs"] = f.n_wfs;
        j["fe"] = f.fe;
        j["rfe"] = f.rfe;
        j["accuracy"] = f.accuracy;
        return j;
    };
    nlohmann::ordered_json j;
    j["final_epoch"] = report_json(r.final_report);
    j["best_epoch"] = report_json(r.best_report);
    std::ofstream os(path);
    os << j.dump(2) << '\n';
}

} // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    return run_seed_impl(cfg, seed, nullptr);
}

std::vector<double> RunResult::final_accuracies() const {
    std::vector<double> out;
    for (const auto& s : per_seed) out.push_back(s.final_test_accuracy);
    return out;
}

std::vector<double> RunResult::best_accuracies() const {
    std::vector<double> out;
    for (const auto& s : per_seed) out.push_back(s.best_test_accuracy);
    return out;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    const std::string out_dir = resolve_output_dir(cfg.output_dir);
    const bool write = !out_dir.empty();
    if (write) std::filesystem::create_directories(out_dir);

    RunResult result;
    result.config = cfg;

    std::vector<std::pair<std::uint64_t, double>> timings;
    for (const std::uint64_t seed : cfg.seeds) {
        const auto t0 = std::chrono::steady_clock::now();
        SeedArtifacts artifacts;
        SeedResult sr = run_seed_impl(cfg, seed, write ? &artifacts : nullptr);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        timings.emplace_back(seed, elapsed);

        if (write) {
            const std::string prefix = out_dir + "/seed" + std::to_string(seed);
            std::ofstream(prefix + "_metrics.jsonl") << sr.metrics_stream;
            artifacts.test_history.save(prefix + "_history.txt");
            artifacts.model.save(prefix + "_model.ckpt");
            if (artifacts.has_memory) artifacts.memory.save(prefix + "_behavior.bin");
            write_manifest(artifacts.dataset, prefix + "_manifest.json");
            write_flip_json(prefix + "_flip.json", sr);
        }
        result.per_seed.push_back(std::move(sr));
    }

    std::tie(result.mean_final, result.std_final) = mean_std(result.final_accuracies());
    std::tie(result.mean_best, result.std_best) = mean_std(result.best_accuracies());

    if (write) {
        std::ofstream cfg_out(out_dir + "/config.txt");
        cfg_out << cfg.to_text();

        std::ostringstream summary;
        summary.precision(6);
        summary << "method\tmetric\tmean\tstd";
        for (auto seed : cfg.seeds) summary << "\tseed" << seed;
        summary << '\n';
        auto row = [&](const char* metric, double mean, double stddev,
                       const std::vector<double>& values) {
            summary << method_name(cfg.loss.method) << '\t' << metric << '\t' << mean << '\t'
                    << stddev;
            for (double v : values) summary << '\t' << v;
            summary << '\n';
        };
        row("final_accuracy", result.mean_final, result.std_final, result.final_accuracies());
        row("best_accuracy", result.mean_best, result.std_best, result.best_accuracies());
        std::ofstream(out_dir + "/summary.tsv") << summary.str();

        std::ostringstream timing;
        timing << "seed\twall_time_s\n";
        timing.precision(6);
        for (auto [seed, secs] : timings) timing << seed << '\t' << secs << '\n';
        std::ofstream(out_dir + "/timings.tsv") << timing.str();
    }
    return result;
}

Comparison compare(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw ConfigError("compare: no runs");
    const std::string fingerprint = runs.front().config.dataset_fingerprint();
    const auto& seeds = runs.front().config.seeds;
    for (const auto& run : runs) {
        if (run.config.seeds != seeds)
            throw ConfigError("compare: seed lists differ; paired comparison impossible");
        if (run.config.dataset_fingerprint() != fingerprint)
            throw ConfigError("compare: configs describe different datasets");
    }

    Comparison cmp;
    cmp.seeds = seeds;
    const auto baseline = runs.front().final_accuracies();
    for (const auto& run : runs) {
        Comparison::Row row;
        row.name = run.config.run_name.empty() ? method_name(run.config.loss.method)
                                               : run.config.run_name;
        row.method = run.config.loss.method;
        row.mean_final = run.mean_final;
        row.std_final = run.std_final;
        row.mean_best = run.mean_best;
        row.std_best = run.std_best;
        row.final_per_seed = run.final_accuracies();

        std::vector<double> fes, rfes, deltas;
        for (std::size_t i = 0; i < run.per_seed.size(); ++i) {
            fes.push_back(run.per_seed[i].final_report.fe);
            rfes.push_back(run.per_seed[i].final_report.rfe);
            deltas.push_back(run.per_seed[i].final_test_accuracy - baseline[i]);
        }
        row.mean_fe = mean_std(fes).first;
        row.mean_rfe = mean_std(rfes).first;
        row.delta_vs_baseline = mean_std(deltas).first;
        cmp.rows.push_back(std::move(row));
    }
    return cmp;
}

Comparison compare_configs(const std::vector<ExperimentConfig>& configs) {
    std::vector<RunResult> runs;
    runs.reserve(configs.size());
    for (const auto& cfg : configs) runs.push_back(run_experiment(cfg));
    return compare(runs);
}

std::string Comparison::to_tsv() const {
    std::ostringstream os;
    os.precision(6);
    os << "name\tmethod\tfinal_mean\tfinal_std\tbest_mean\tbest_std\tmean_fe\tmean_rfe\tdelta_vs_first";
    for (auto seed : seeds) os << "\tseed" << seed;
    os << '\n';
    for (const auto& row : rows) {
        os << row.name << '\t' << method_name(row.method) << '\t' << row.mean_final << '\t'
           << row.std_final << '\t' << row.mean_best << '\t' << row.std_best << '\t' << row.mean_fe
           << '\t' << row.mean_rfe << '\t' << row.delta_vs_baseline;
        for (double v : row.final_per_seed) os << '\t' << v;
        os << '\n';
    }
    return os.str();
}

} // namespace fer
