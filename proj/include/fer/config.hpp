#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fer/data.hpp"
#include "fer/losses.hpp"

namespace fer {

/// Full description of one experiment: data source, split, objective,
/// model/optimizer settings, seeds, and output location. Parsed from a flat
/// `key = value` text file; unknown keys are an error.
struct ExperimentConfig {
    // data
    std::string data_source = "csv"; // csv | blobs
    std::string data_path;
    std::string data_test_path; // optional second file: published train/test pair
    DelimitedSchema schema;
    int blobs_classes = 4;
    int blobs_per_class = 100;
    int blobs_dim = 2;
    double blobs_separation = 2.0;
    std::uint64_t blobs_seed = 1234; // mixed with the run seed per run
    double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
    std::int64_t split_seed = -1; // -1: follow the run seed
    bool standardize_features = true;

    // objective
    LossSpec loss;

    // noise
    bool noise_enabled = false;
    double noise_rate = 0.0;
    std::int64_t noise_seed = -1; // -1: derived from the run seed
    bool noise_exclude_true = false;

    // model / optimizer
    std::vector<int> hidden_sizes = {128, 128};
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::vector<double> lr_milestones = {0.5, 0.75}; // fractions of total epochs
    double lr_gamma = 0.1;

    int epochs = 60;
    int batch_size = 32;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

    // output
    std::string output_dir; // empty: no artifacts written
    std::string run_name;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);

    /// Throws ConfigError on any inconsistency (missing files included).
    void validate() const;

    /// Canonical `key = value` rendering of every setting.
    std::string to_text() const;

    /// Keys that define the data a run sees; paired comparisons require these
    /// to match across configs.
    std::string dataset_fingerprint() const;
};

} // namespace fer
