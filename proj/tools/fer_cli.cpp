#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fer/config.hpp"
#include "fer/data.hpp"
#include "fer/gradcheck.hpp"
#include "fer/harness.hpp"
#include "fer/metrics.hpp"

namespace {

int cmd_train(const std::string& config_path, const std::string& output_dir) {
    fer::ExperimentConfig cfg = fer::ExperimentConfig::from_file(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    cfg.validate();
    const fer::RunResult result = fer::run_experiment(cfg);

    std::printf("run: %s  method: %s  seeds: %zu\n", cfg.run_name.c_str(),
                fer::method_name(cfg.loss.method).c_str(), cfg.seeds.size());
    std::printf("final accuracy: %.4f +/- %.4f\n", result.mean_final, result.std_final);
    std::printf("best accuracy:  %.4f +/- %.4f\n", result.mean_best, result.std_best);
    for (const auto& s : result.per_seed)
        std::printf("  seed %llu: final %.4f (FE %.4f, RFE %.4f)  best@%d %.4f\n",
                    static_cast<unsigned long long>(s.seed), s.final_test_accuracy,
                    s.final_report.fe, s.final_report.rfe, s.best_epoch, s.best_test_accuracy);
    if (!cfg.output_dir.empty())
        std::printf("artifacts: %s\n", fer::resolve_output_dir(cfg.output_dir).c_str());
    return 0;
}

int cmd_compare(const std::vector<std::string>& config_paths) {
    std::vector<fer::ExperimentConfig> configs;
    for (const auto& path : config_paths) {
        configs.push_back(fer::ExperimentConfig::from_file(path));
        configs.back().validate();
    }
    const fer::Comparison cmp = fer::compare_configs(configs);
    std::cout << cmp.to_tsv();
    return 0;
}

int cmd_flip_report(const std::string& history_path, int at_epoch) {
    const fer::PredictionHistory hist = fer::PredictionHistory::load(history_path);
    if (hist.epoch_count() == 0) throw fer::ParseError("history has no epochs");
    const int epoch = at_epoch < 0 ? hist.epoch_count() - 1 : at_epoch;
    const fer::FlipReport r = hist.flip_report(epoch);
    std::printf("at_epoch: %d\n", r.epoch);
    std::printf("n_eval: %zu  misclassified: %zu  wfs: %zu  accuracy: %.3f\n", r.n_eval,
                r.n_misclassified, r.n_wfs, r.accuracy);
    std::printf("FE=%.3f, RFE=%.3f\n", r.fe, r.rfe);
    return 0;
}

int cmd_noise_inject(const std::string& dataset_path, double rate, std::uint64_t seed,
                     const std::string& out_path, bool exclude_true, bool has_header,
                     int label_column) {
    fer::DelimitedSchema schema;
    schema.has_header = has_header;
    schema.label_column = label_column;
    fer::Dataset ds = fer::load_delimited(dataset_path, schema);
    // The whole file is treated as the training portion.
    for (std::size_t i = 0; i < ds.size(); ++i) ds.train_idx.push_back(i);
    fer::NoiseSpec spec;
    spec.rate = rate;
    spec.seed = seed;
    spec.exclude_true_class = exclude_true;
    ds = fer::inject_noise(std::move(ds), spec);

    const std::string out = out_path.empty() ? dataset_path + ".noisy" : out_path;
    fer::save_delimited(ds, out);
    fer::write_manifest(ds, out + ".manifest.json");
    std::size_t flipped = 0;
    for (bool b : ds.noise_mask)
        if (b) ++flipped;
    std::printf("wrote %s (%zu of %zu labels redrawn, mask in manifest)\n", out.c_str(), flipped,
                ds.size());
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int points) {
    const fer::GradCheckReport report = fer::run_gradient_checks(seed, points);
    for (const auto& check : report.checks)
        std::printf("%-44s max rel error %.3e\n", check.name.c_str(), check.max_rel_error);
    std::printf("overall max relative error: %.3e\n", report.max_rel_error);
    if (!report.passed()) {
        std::fprintf(stderr, "gradcheck FAILED (tolerance 1e-5)\n");
        return 1;
    }
    std::printf("gradcheck OK\n");
    return 0;
}

int cmd_make_blobs(int classes, int per_class, int dim, double separation, std::uint64_t seed,
                   const std::string& out_path) {
    const fer::Dataset ds = fer::make_blobs(classes, per_class, dim, separation, seed);
    fer::save_delimited(ds, out_path);
    std::printf("wrote %s (%zu samples, %d classes, %d features)\n", out_path.c_str(), ds.size(),
                classes, dim);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fer: flipping-error-reduction training laboratory"};
    app.require_subcommand(1);

    // Deterministic single-threaded execution is the default and only mode.
    bool deterministic = true;
    app.add_flag("--deterministic", deterministic, "deterministic execution (always on)");

    std::string config_path, output_dir;
    auto* train = app.add_subcommand("train", "run an experiment from a config file");
    train->add_option("config", config_path, "config file")->required();
    train->add_option("--output-dir", output_dir, "override output.dir");

    std::vector<std::string> compare_paths;
    auto* cmp = app.add_subcommand("compare", "paired comparison of configs sharing data+seeds");
    cmp->add_option("configs", compare_paths, "config files")->required()->expected(-2);

    std::string history_path;
    int at_epoch = -1;
    auto* flip = app.add_subcommand("flip-report", "flip metrics from a prediction history file");
    flip->add_option("history", history_path, "history file")->required();
    flip->add_option("--at-epoch", at_epoch, "epoch to report at (default: last)");

    std::string noise_data, noise_out;
    double noise_rate = 0.0;
    std::uint64_t noise_seed = 0;
    bool noise_exclude = false, noise_header = false;
    int noise_label_col = -1;
    auto* noise = app.add_subcommand("noise-inject", "redraw a fraction of labels in a dataset file");
    noise->add_option("dataset", noise_data, "delimited dataset file")->required();
    noise->add_option("--rate", noise_rate, "fraction of labels to redraw")->required();
    noise->add_option("--seed", noise_seed, "rng seed")->required();
    noise->add_option("--out", noise_out, "output path (default: <dataset>.noisy)");
    noise->add_flag("--exclude-true-class", noise_exclude, "redraw over the other K-1 classes");
    noise->add_flag("--has-header", noise_header, "skip the first row");
    noise->add_option("--label-column", noise_label_col, "label column index (default: last)");

    std::uint64_t gc_seed = 7;
    int gc_points = 50;
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient validation suite");
    gradcheck->add_option("--seed", gc_seed, "rng seed");
    gradcheck->add_option("--points", gc_points, "random points per loss");

    int blob_classes = 4, blob_per_class = 100, blob_dim = 2;
    double blob_sep = 2.0;
    std::uint64_t blob_seed = 0;
    std::string blob_out = "blobs.csv";
    auto* blobs = app.add_subcommand("make-blobs", "generate a Gaussian-cluster dataset");
    blobs->add_option("--classes", blob_classes, "number of classes");
    blobs->add_option("--per-class", blob_per_class, "samples per class");
    blobs->add_option("--dim", blob_dim, "feature dimension");
    blobs->add_option("--separation", blob_sep, "distance between adjacent cluster means");
    blobs->add_option("--seed", blob_seed, "rng seed");
    blobs->add_option("--out", blob_out, "output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(config_path, output_dir);
        if (*cmp) return cmd_compare(compare_paths);
        if (*flip) return cmd_flip_report(history_path, at_epoch);
        if (*noise)
            return cmd_noise_inject(noise_data, noise_rate, noise_seed, noise_out, noise_exclude,
                                    noise_header, noise_label_col);
        if (*gradcheck) return cmd_gradcheck(gc_seed, gc_points);
        if (*blobs)
            return cmd_make_blobs(blob_classes, blob_per_class, blob_dim, blob_sep, blob_seed,
                                  blob_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
