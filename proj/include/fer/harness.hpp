#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fer/behavior_memory.hpp"
#include "fer/config.hpp"
#include "fer/data.hpp"
#include "fer/metrics.hpp"
#include "fer/model.hpp"

namespace fer {

/// One row of the per-epoch metrics stream. `wall_time` is measured, so it is
/// kept out of the serialized stream (which must be bitwise reproducible) and
/// reported through the timing sidecar instead.
struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double eval_accuracy = 0.0;
    double val_accuracy = -1.0; // -1 when there is no validation split
    double fe = 0.0;
    double rfe = 0.0;
    int wfs_count = 0;
    double alpha = 1.0;
    double beta = 0.0;
    double wall_time = 0.0;

    // Cross-module consistency counters (not serialized): how many samples
    // took the behavior-regularized branch vs. how many flagged memory
    // entries were seen at loss time.
    std::size_t cor_branch_uses = 0;
    std::size_t flagged_at_loss = 0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<EpochRecord> records;
    FlipReport final_report;
    FlipReport best_report;
    int best_epoch = 0;
    double final_test_accuracy = 0.0;
    double best_test_accuracy = 0.0; // test accuracy at the best-validation epoch
    std::string metrics_stream;      // JSONL, one record per epoch
};

struct RunResult {
    ExperimentConfig config;
    std::vector<SeedResult> per_seed;
    double mean_final = 0.0, std_final = 0.0;
    double mean_best = 0.0, std_best = 0.0;

    std::vector<double> final_accuracies() const;
    std::vector<double> best_accuracies() const;
};

/// Materialize the dataset one run sees: load/generate, split, standardize,
/// inject noise. Deterministic in (config, run_seed).
Dataset build_dataset(const ExperimentConfig& cfg, std::uint64_t run_seed);

/// Train one seed end to end and return its records. Single-threaded.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Run every seed of the config; writes the artifact set when output.dir is
/// configured (metrics streams, histories, snapshots, checkpoints, manifests,
/// summary).
RunResult run_experiment(const ExperimentConfig& cfg);

/// Paired method comparison over identical data/splits/seeds.
struct Comparison {
    struct Row {
        std::string name;
        Method method = Method::Std;
        double mean_final = 0.0, std_final = 0.0;
        double mean_best = 0.0, std_best = 0.0;
        double mean_fe = 0.0, mean_rfe = 0.0;
        std::vector<double> final_per_seed;
        double delta_vs_baseline = 0.0; // mean paired final-accuracy delta
    };
    std::vector<std::uint64_t> seeds;
    std::vector<Row> rows;

    std::string to_tsv() const;
};

Comparison compare(const std::vector<RunResult>& runs);
Comparison compare_configs(const std::vector<ExperimentConfig>& configs);

/// argmax class per row, ties to the lowest index.
std::vector<int> predict_classes(const MlpModel& model, const Eigen::Ref<const Matrix>& features);

std::pair<double, double> mean_std(const std::vector<double>& xs);

/// Environment override for relative output directories.
std::string resolve_output_dir(const std::string& dir);

} // namespace fer
