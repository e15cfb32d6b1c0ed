#include "fer/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fer/errors.hpp"
#include "fer/rng.hpp"

namespace fer {

namespace {

std::vector<std::string> tokenize(const std::string& line, Delimiter delim) {
    std::vector<std::string> out;
    if (delim == Delimiter::Comma) {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(tok);
        if (!line.empty() && line.back() == ',') out.emplace_back();
    } else {
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) out.push_back(tok);
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(t, &used);
    } catch (...) {
        return false;
    }
    return used == t.size();
}

} // namespace

Matrix Dataset::rows(const std::vector<std::size_t>& idx) const {
    Matrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

std::vector<int> Dataset::labels_at(const std::vector<std::size_t>& idx) const {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

Dataset load_delimited(const std::string& path, const DelimitedSchema& schema,
                       const std::vector<std::string>* fixed_labels) {
    std::ifstream is(path);
    if (!is) throw ConfigError("dataset: cannot open " + path);

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    std::size_t first_row = schema.has_header ? 1 : 0;
    if (lines.size() <= first_row) throw ParseError("dataset: no data rows in " + path);

    Delimiter delim = schema.delimiter;
    if (delim == Delimiter::Auto)
        delim = lines[first_row].find(',') != std::string::npos ? Delimiter::Comma
                                                                : Delimiter::Whitespace;

    std::unordered_map<std::string, int> label_map;
    std::vector<std::string> label_names;
    if (fixed_labels) {
        label_names = *fixed_labels;
        for (std::size_t i = 0; i < label_names.size(); ++i)
            label_map[label_names[i]] = static_cast<int>(i);
    }

    std::vector<std::vector<double>> feature_rows;
    std::vector<int> labels;
    Eigen::Index width = -1;

    for (std::size_t r = first_row; r < lines.size(); ++r) {
        const std::size_t line_no = r + 1; // 1-based, counting the header
        auto tokens = tokenize(lines[r], delim);
        if (tokens.size() < 2)
            throw ParseError("dataset: line " + std::to_string(line_no) + ": expected at least 2 columns");

        int label_col = schema.label_column < 0
                            ? static_cast<int>(tokens.size()) - 1
                            : schema.label_column;
        if (label_col >= static_cast<int>(tokens.size()))
            throw ParseError("dataset: line " + std::to_string(line_no) + ": label column out of range");

        std::vector<double> row;
        row.reserve(tokens.size() - 1);
        for (std::size_t c = 0; c < tokens.size(); ++c) {
            if (static_cast<int>(c) == label_col) continue;
            double v = 0.0;
            if (!parse_double(tokens[c], v))
                throw ParseError("dataset: line " + std::to_string(line_no) + ": non-numeric feature '" +
                                 trim(tokens[c]) + "'");
            row.push_back(v);
        }
        if (width < 0) width = static_cast<Eigen::Index>(row.size());
        if (static_cast<Eigen::Index>(row.size()) != width)
            throw ParseError("dataset: line " + std::to_string(line_no) + ": ragged row");

        const std::string label_text = trim(tokens[static_cast<std::size_t>(label_col)]);
        auto it = label_map.find(label_text);
        if (it == label_map.end()) {
            if (fixed_labels)
                throw ParseError("dataset: line " + std::to_string(line_no) + ": unseen label '" +
                                 label_text + "'");
            const int id = static_cast<int>(label_names.size());
            label_map.emplace(label_text, id);
            label_names.push_back(label_text);
            labels.push_back(id);
        } else {
            labels.push_back(it->second);
        }
        feature_rows.push_back(std::move(row));
    }

    Dataset ds;
    ds.source = path;
    ds.features.resize(static_cast<Eigen::Index>(feature_rows.size()), width);
    for (std::size_t i = 0; i < feature_rows.size(); ++i)
        for (Eigen::Index j = 0; j < width; ++j)
            ds.features(static_cast<Eigen::Index>(i), j) = feature_rows[i][static_cast<std::size_t>(j)];
    ds.labels = std::move(labels);
    ds.label_names = std::move(label_names);
    ds.class_count = static_cast<int>(ds.label_names.size());
    ds.noise_mask.assign(ds.size(), false);
    return ds;
}

Dataset load_pair(const std::string& train_path, const std::string& test_path,
                  const DelimitedSchema& schema) {
    Dataset train = load_delimited(train_path, schema);
    Dataset test = load_delimited(test_path, schema, &train.label_names);
    if (test.dim() != train.dim())
        throw ShapeError("dataset pair: feature width differs between files");

    Dataset ds;
    ds.source = train_path + "+" + test_path;
    ds.features.resize(train.features.rows() + test.features.rows(), train.dim());
    ds.features.topRows(train.features.rows()) = train.features;
    ds.features.bottomRows(test.features.rows()) = test.features;
    ds.labels = train.labels;
    ds.labels.insert(ds.labels.end(), test.labels.begin(), test.labels.end());
    ds.label_names = train.label_names;
    ds.class_count = train.class_count;
    ds.noise_mask.assign(ds.size(), false);
    for (std::size_t i = 0; i < train.size(); ++i) ds.train_idx.push_back(i);
    for (std::size_t i = 0; i < test.size(); ++i) ds.test_idx.push_back(train.size() + i);
    return ds;
}

Dataset split(Dataset ds, double train_frac, double val_frac, double test_frac,
              std::uint64_t seed) {
    const double total = train_frac + val_frac + test_frac;
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
    if (train_frac < 0 || val_frac < 0 || test_frac < 0)
        throw ConfigError("split: fractions must be nonnegative");

    const double fracs[3] = {train_frac, val_frac, test_frac};
    int parts = 0;
    for (double f : fracs)
        if (f > 0.0) ++parts;

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    ds.train_idx.clear();
    ds.val_idx.clear();
    ds.test_idx.clear();

    Rng rng(seed);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (static_cast<int>(members.size()) < parts)
            throw ConfigError("split: class " + std::to_string(c) + " has fewer samples (" +
                              std::to_string(members.size()) + ") than split parts (" +
                              std::to_string(parts) + ")");
        rng.shuffle(members);

        const std::size_t n = members.size();
        std::size_t counts[3];
        double remainders[3];
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double want = fracs[s] * static_cast<double>(n);
            counts[s] = static_cast<std::size_t>(std::floor(want));
            remainders[s] = want - std::floor(want);
            assigned += counts[s];
        }
        while (assigned < n) {
            int best = 0;
            for (int s = 1; s < 3; ++s)
                if (remainders[s] > remainders[best]) best = s;
            ++counts[best];
            remainders[best] = -1.0;
            ++assigned;
        }

        std::size_t pos = 0;
        for (std::size_t i = 0; i < counts[0]; ++i) ds.train_idx.push_back(members[pos++]);
        for (std::size_t i = 0; i < counts[1]; ++i) ds.val_idx.push_back(members[pos++]);
        for (std::size_t i = 0; i < counts[2]; ++i) ds.test_idx.push_back(members[pos++]);
    }
    std::sort(ds.train_idx.begin(), ds.train_idx.end());
    std::sort(ds.val_idx.begin(), ds.val_idx.end());
    std::sort(ds.test_idx.begin(), ds.test_idx.end());
    return ds;
}

Dataset standardize(Dataset ds) {
    if (ds.train_idx.empty()) throw ConfigError("standardize: train split is empty");
    const Eigen::Index d = ds.dim();
    const double n = static_cast<double>(ds.train_idx.size());

    Vector mean = Vector::Zero(d);
    for (auto i : ds.train_idx) mean += ds.features.row(static_cast<Eigen::Index>(i)).transpose();
    mean /= n;

    Vector var = Vector::Zero(d);
    for (auto i : ds.train_idx) {
        Vector diff = ds.features.row(static_cast<Eigen::Index>(i)).transpose() - mean;
        var += diff.cwiseProduct(diff);
    }
    var /= n;
    Vector stddev = var.cwiseSqrt().cwiseMax(1e-8);

    ds.features = (ds.features.rowwise() - mean.transpose()).array().rowwise() /
                  stddev.transpose().array();
    return ds;
}

Dataset inject_noise(Dataset ds, const NoiseSpec& spec) {
    if (!(spec.rate >= 0.0 && spec.rate <= 1.0)) throw ConfigError("noise: rate must be in [0,1]");
    ds.noise_mask.assign(ds.size(), false);
    const std::size_t n_train = ds.train_idx.size();
    const auto n_corrupt =
        static_cast<std::size_t>(std::floor(spec.rate * static_cast<double>(n_train)));
    if (n_corrupt == 0) return ds;

    Rng rng(spec.seed);
    std::vector<std::size_t> order = ds.train_idx;
    rng.shuffle(order);
    const auto k = static_cast<std::size_t>(ds.class_count);
    for (std::size_t i = 0; i < n_corrupt; ++i) {
        const std::size_t row = order[i];
        int new_label;
        if (spec.exclude_true_class) {
            auto draw = rng.index(k - 1);
            new_label = static_cast<int>(draw) +
                        (static_cast<int>(draw) >= ds.labels[row] ? 1 : 0);
        } else {
            new_label = static_cast<int>(rng.index(k)); // may coincide with the original
        }
        ds.labels[row] = new_label;
        ds.noise_mask[row] = true;
    }
    return ds;
}

Dataset make_blobs(int classes, int per_class, int dim, double separation, std::uint64_t seed) {
    if (classes < 2 || per_class < 1 || dim < 1)
        throw ConfigError("make_blobs: classes >= 2, per_class >= 1, dim >= 1 required");
    if (separation < 0.0) throw ConfigError("make_blobs: separation must be nonnegative");

    Matrix means = Matrix::Zero(classes, dim);
    if (separation > 0.0) {
        if (dim == 1) {
            for (int c = 0; c < classes; ++c) means(c, 0) = separation * c;
        } else {
            // Evenly spaced on a circle; adjacent means are `separation` apart.
            const double pi = 3.14159265358979323846;
            const double radius =
                classes == 2 ? separation / 2.0 : separation / (2.0 * std::sin(pi / classes));
            for (int c = 0; c < classes; ++c) {
                const double angle = 2.0 * pi * c / classes;
                means(c, 0) = radius * std::cos(angle);
                means(c, 1) = radius * std::sin(angle);
            }
        }
    }

    Dataset ds;
    ds.source = "blobs";
    const Eigen::Index n = static_cast<Eigen::Index>(classes) * per_class;
    ds.features.resize(n, dim);
    ds.labels.resize(static_cast<std::size_t>(n));
    Rng rng(seed);
    Eigen::Index row = 0;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i, ++row) {
            for (int j = 0; j < dim; ++j) ds.features(row, j) = means(c, j) + rng.normal();
            ds.labels[static_cast<std::size_t>(row)] = c;
        }
    }
    ds.class_count = classes;
    for (int c = 0; c < classes; ++c) ds.label_names.push_back(std::to_string(c));
    ds.noise_mask.assign(ds.size(), false);
    return ds;
}

void save_delimited(const Dataset& ds, const std::string& path, char delimiter) {
    std::ofstream os(path);
    if (!os) throw ConfigError("dataset: cannot open " + path + " for writing");
    os.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (Eigen::Index j = 0; j < ds.dim(); ++j) os << ds.features(r, j) << delimiter;
        os << ds.label_names[static_cast<std::size_t>(ds.labels[i])] << '\n';
    }
    if (!os) throw ConfigError("dataset: write failed for " + path);
}

void write_manifest(const Dataset& ds, const std::string& path) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["source"] = ds.source;
    j["n"] = ds.size();
    j["d"] = ds.dim();
    j["classes"] = ds.class_count;
    j["label_names"] = ds.label_names;
    j["train_idx"] = ds.train_idx;
    j["val_idx"] = ds.val_idx;
    j["test_idx"] = ds.test_idx;
    std::vector<std::size_t> noisy;
    for (std::size_t i = 0; i < ds.noise_mask.size(); ++i)
        if (ds.noise_mask[i]) noisy.push_back(i);
    j["noise_idx"] = noisy;

    std::ofstream os(path);
    if (!os) throw ConfigError("manifest: cannot open " + path + " for writing");
    os << j.dump(2) << '\n';
}

} // namespace fer
