#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fer/numerics.hpp"

namespace fer {

enum class Delimiter { Auto, Comma, Whitespace };

/// Column layout of a delimited file: every column is a feature except the
/// label column (-1 means last).
struct DelimitedSchema {
    Delimiter delimiter = Delimiter::Auto;
    int label_column = -1;
    bool has_header = false;
};

struct NoiseSpec {
    double rate = 0.0;
    std::uint64_t seed = 0;
    bool exclude_true_class = false; // redraw over K-1 instead of all K classes
};

/// Immutable-after-construction tabular dataset with split assignment and a
/// record of which training labels were corrupted.
struct Dataset {
    Matrix features; // n x d
    std::vector<int> labels;
    int class_count = 0;
    std::vector<std::string> label_names; // class index -> original label text
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    std::vector<bool> noise_mask; // size n; set only on train rows
    std::string source;

    std::size_t size() const { return labels.size(); }
    Eigen::Index dim() const { return features.cols(); }

    Matrix rows(const std::vector<std::size_t>& idx) const;
    std::vector<int> labels_at(const std::vector<std::size_t>& idx) const;
};

/// Parse a delimited text file. Features are reals; labels are mapped to class
/// indices by first appearance. With `fixed_labels`, the mapping is imposed and
/// an unseen label is an error (loading a test file against a train mapping).
Dataset load_delimited(const std::string& path, const DelimitedSchema& schema = {},
                       const std::vector<std::string>* fixed_labels = nullptr);

/// Load a published train/test pair into one dataset with explicit splits.
Dataset load_pair(const std::string& train_path, const std::string& test_path,
                  const DelimitedSchema& schema = {});

/// Stratified shuffled split, deterministic per seed. Per class, counts are
/// floor(fraction * n_c) with leftovers assigned by largest remainder
/// (ties: train, then val, then test).
Dataset split(Dataset ds, double train_frac, double val_frac, double test_frac,
              std::uint64_t seed);

/// Standardize every feature to train-split mean 0 / std 1 (std floored at
/// 1e-8); val and test are transformed with the train statistics.
Dataset standardize(Dataset ds);

/// Replace floor(rate * n_train) training labels (chosen uniformly without
/// replacement) by uniform draws over the classes. Val/test rows untouched.
Dataset inject_noise(Dataset ds, const NoiseSpec& spec);

/// Isotropic unit-variance Gaussian clusters with pairwise-adjacent means
/// `separation` apart (evenly spaced on a circle in the first two dims for
/// d >= 2, on a line for d == 1). Rows are class-major, labels "0".."K-1".
Dataset make_blobs(int classes, int per_class, int dim, double separation, std::uint64_t seed);

void save_delimited(const Dataset& ds, const std::string& path, char delimiter = ',');

/// Reproducibility sidecar: label mapping, split indices, noise mask (JSON).
void write_manifest(const Dataset& ds, const std::string& path);

} // namespace fer
