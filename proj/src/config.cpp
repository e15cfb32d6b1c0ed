#include "fer/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fer/errors.hpp"

namespace fer {

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: expected boolean, got '" + v + "'");
}

double parse_real(const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw ConfigError("config: expected number, got '" + v + "'");
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        throw ConfigError("config: expected number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& v) {
    try {
        std::size_t used = 0;
        const std::int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw ConfigError("config: expected integer, got '" + v + "'");
        return x;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        throw ConfigError("config: expected integer, got '" + v + "'");
    }
}

template <typename T>
std::vector<T> parse_list(const std::string& v, const std::function<T(const std::string&)>& one) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto b = tok.find_first_not_of(" \t");
        const auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("config: empty list element in '" + v + "'");
        out.push_back(one(tok.substr(b, e - b + 1)));
    }
    if (out.empty()) throw ConfigError("config: empty list '" + v + "'");
    return out;
}

Delimiter parse_delimiter(const std::string& v) {
    if (v == "auto") return Delimiter::Auto;
    if (v == "comma") return Delimiter::Comma;
    if (v == "whitespace" || v == "space") return Delimiter::Whitespace;
    throw ConfigError("config: data.delimiter must be auto|comma|whitespace");
}

std::string delimiter_name(Delimiter d) {
    switch (d) {
        case Delimiter::Auto: return "auto";
        case Delimiter::Comma: return "comma";
        case Delimiter::Whitespace: return "whitespace";
    }
    return "auto";
}

} // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r\n");
        line = line.substr(b, e - b + 1);

        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        auto strip = [](std::string s) {
            const auto sb = s.find_first_not_of(" \t");
            if (sb == std::string::npos) return std::string{};
            const auto se = s.find_last_not_of(" \t");
            return s.substr(sb, se - sb + 1);
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        if (value.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty value for " + key);

        if (key == "data.source") cfg.data_source = value;
        else if (key == "data.path") cfg.data_path = value;
        else if (key == "data.test_path") cfg.data_test_path = value;
        else if (key == "data.delimiter") cfg.schema.delimiter = parse_delimiter(value);
        else if (key == "data.label_column") cfg.schema.label_column = static_cast<int>(parse_int(value));
        else if (key == "data.has_header") cfg.schema.has_header = parse_bool(value);
        else if (key == "blobs.classes") cfg.blobs_classes = static_cast<int>(parse_int(value));
        else if (key == "blobs.per_class") cfg.blobs_per_class = static_cast<int>(parse_int(value));
        else if (key == "blobs.dim") cfg.blobs_dim = static_cast<int>(parse_int(value));
        else if (key == "blobs.separation") cfg.blobs_separation = parse_real(value);
        else if (key == "blobs.seed") cfg.blobs_seed = static_cast<std::uint64_t>(parse_int(value));
        else if (key == "split.train") cfg.train_frac = parse_real(value);
        else if (key == "split.val") cfg.val_frac = parse_real(value);
        else if (key == "split.test") cfg.test_frac = parse_real(value);
        else if (key == "split.seed") cfg.split_seed = parse_int(value);
        else if (key == "standardize") cfg.standardize_features = parse_bool(value);
        else if (key == "method") cfg.loss.method = method_from_string(value);
        else if (key == "fer.tau") cfg.loss.tau = parse_real(value);
        else if (key == "fer.mu") cfg.loss.mu = parse_real(value);
        else if (key == "fer.rho") cfg.loss.rho = parse_real(value);
        else if (key == "fer.no_gate") cfg.loss.no_gate = parse_bool(value);
        else if (key == "fer.no_average") cfg.loss.no_average = parse_bool(value);
        else if (key == "fer.noisy_mode") cfg.loss.noisy_mode = parse_bool(value);
        else if (key == "fer.kl_model_first") cfg.loss.kl_model_first = parse_bool(value);
        else if (key == "fer.tau_squared_scale") cfg.loss.tau_squared_scale = parse_bool(value);
        else if (key == "lsr.epsilon") cfg.loss.epsilon = parse_real(value);
        else if (key == "maxent.lambda") cfg.loss.lambda = parse_real(value);
        else if (key == "noise.rate") {
            cfg.noise_enabled = true;
            cfg.noise_rate = parse_real(value);
        } else if (key == "noise.seed") cfg.noise_seed = parse_int(value);
        else if (key == "noise.exclude_true_class") cfg.noise_exclude_true = parse_bool(value);
        else if (key == "model.hidden")
            cfg.hidden_sizes = parse_list<int>(value, [](const std::string& s) {
                return static_cast<int>(parse_int(s));
            });
        else if (key == "optimizer.lr") cfg.learning_rate = parse_real(value);
        else if (key == "optimizer.momentum") cfg.momentum = parse_real(value);
        else if (key == "optimizer.weight_decay") cfg.weight_decay = parse_real(value);
        else if (key == "optimizer.lr_milestones")
            cfg.lr_milestones = parse_list<double>(value, parse_real);
        else if (key == "optimizer.lr_gamma") cfg.lr_gamma = parse_real(value);
        else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(value));
        else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(value));
        else if (key == "seeds")
            cfg.seeds = parse_list<std::uint64_t>(value, [](const std::string& s) {
                return static_cast<std::uint64_t>(parse_int(s));
            });
        else if (key == "output.dir") cfg.output_dir = value;
        else if (key == "run.name") cfg.run_name = value;
        else
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    cfg.loss.total_epochs = cfg.epochs;
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    ExperimentConfig cfg = from_string(buf.str());
    if (cfg.run_name.empty())
        cfg.run_name = std::filesystem::path(path).stem().string();
    return cfg;
}

void ExperimentConfig::validate() const {
    if (data_source != "csv" && data_source != "blobs")
        throw ConfigError("config: data.source must be csv or blobs");
    if (data_source == "csv") {
        if (data_path.empty()) throw ConfigError("config: data.path is required for csv source");
        if (!std::filesystem::exists(data_path))
            throw ConfigError("config: dataset file not found: " + data_path);
        if (!data_test_path.empty() && !std::filesystem::exists(data_test_path))
            throw ConfigError("config: dataset file not found: " + data_test_path);
    } else {
        if (blobs_classes < 2 || blobs_per_class < 1 || blobs_dim < 1)
            throw ConfigError("config: invalid blobs geometry");
    }
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw ConfigError("config: split fractions must sum to 1");
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (seeds.empty()) throw ConfigError("config: need at least one seed");
    if (hidden_sizes.empty()) throw ConfigError("config: need at least one hidden layer size");
    for (int h : hidden_sizes)
        if (h < 1) throw ConfigError("config: hidden sizes must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("config: momentum in [0,1)");
    if (!(lr_gamma > 0.0)) throw ConfigError("config: lr_gamma must be positive");
    for (double m : lr_milestones)
        if (!(m >= 0.0 && m <= 1.0)) throw ConfigError("config: lr milestones are fractions of epochs");
    if (noise_enabled && !(noise_rate >= 0.0 && noise_rate <= 1.0))
        throw ConfigError("config: noise.rate in [0,1]");
    LossSpec checked = loss;
    checked.total_epochs = epochs;
    checked.validate();
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "data.source = " << data_source << '\n';
    if (!data_path.empty()) os << "data.path = " << data_path << '\n';
    if (!data_test_path.empty()) os << "data.test_path = " << data_test_path << '\n';
    os << "data.delimiter = " << delimiter_name(schema.delimiter) << '\n';
    os << "data.label_column = " << schema.label_column << '\n';
    os << "data.has_header = " << (schema.has_header ? "true" : "false") << '\n';
    if (data_source == "blobs") {
        os << "blobs.classes = " << blobs_classes << '\n';
        os << "blobs.per_class = " << blobs_per_class << '\n';
        os << "blobs.dim = " << blobs_dim << '\n';
        os << "blobs.separation = " << blobs_separation << '\n';
        os << "blobs.seed = " << blobs_seed << '\n';
    }
    os << "split.train = " << train_frac << '\n';
    os << "split.val = " << val_frac << '\n';
    os << "split.test = " << test_frac << '\n';
    os << "split.seed = " << split_seed << '\n';
    os << "standardize = " << (standardize_features ? "true" : "false") << '\n';
    os << "method = " << method_name(loss.method) << '\n';
    os << "fer.tau = " << loss.tau << '\n';
    os << "fer.mu = " << loss.mu << '\n';
    os << "fer.rho = " << loss.rho << '\n';
    os << "fer.no_gate = " << (loss.no_gate ? "true" : "false") << '\n';
    os << "fer.no_average = " << (loss.no_average ? "true" : "false") << '\n';
    os << "fer.noisy_mode = " << (loss.noisy_mode ? "true" : "false") << '\n';
    os << "fer.kl_model_first = " << (loss.kl_model_first ? "true" : "false") << '\n';
    os << "fer.tau_squared_scale = " << (loss.tau_squared_scale ? "true" : "false") << '\n';
    os << "lsr.epsilon = " << loss.epsilon << '\n';
    os << "maxent.lambda = " << loss.lambda << '\n';
    if (noise_enabled) {
        os << "noise.rate = " << noise_rate << '\n';
        os << "noise.seed = " << noise_seed << '\n';
        os << "noise.exclude_true_class = " << (noise_exclude_true ? "true" : "false") << '\n';
    }
    os << "model.hidden = ";
    for (std::size_t i = 0; i < hidden_sizes.size(); ++i)
        os << (i ? "," : "") << hidden_sizes[i];
    os << '\n';
    os << "optimizer.lr = " << learning_rate << '\n';
    os << "optimizer.momentum = " << momentum << '\n';
    os << "optimizer.weight_decay = " << weight_decay << '\n';
    os << "optimizer.lr_milestones = ";
    for (std::size_t i = 0; i < lr_milestones.size(); ++i)
        os << (i ? "," : "") << lr_milestones[i];
    os << '\n';
    os << "optimizer.lr_gamma = " << lr_gamma << '\n';
    os << "epochs = " << epochs << '\n';
    os << "batch_size = " << batch_size << '\n';
    os << "seeds = ";
    for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
    os << '\n';
    if (!output_dir.empty()) os << "output.dir = " << output_dir << '\n';
    if (!run_name.empty()) os << "run.name = " << run_name << '\n';
    return os.str();
}

std::string ExperimentConfig::dataset_fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    os << data_source << '|' << data_path << '|' << data_test_path << '|'
       << static_cast<int>(schema.delimiter) << '|' << schema.label_column << '|'
       << schema.has_header << '|';
    if (data_source == "blobs")
        os << blobs_classes << '|' << blobs_per_class << '|' << blobs_dim << '|'
           << blobs_separation << '|' << blobs_seed << '|';
    os << train_frac << '|' << val_frac << '|' << test_frac << '|' << split_seed << '|'
       << standardize_features << '|' << noise_enabled << '|' << noise_rate << '|' << noise_seed
       << '|' << noise_exclude_true;
    return os.str();
}

} // namespace fer
