#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fer/config.hpp"
#include "fer/errors.hpp"
#include "fer/harness.hpp"
#include "fer/losses.hpp"

using namespace fer;

namespace {

// Small, fast blobs protocol shared by the loop tests.
ExperimentConfig blobs_config() {
    ExperimentConfig cfg;
    cfg.data_source = "blobs";
    cfg.blobs_classes = 3;
    cfg.blobs_per_class = 40;
    cfg.blobs_dim = 2;
    cfg.blobs_separation = 4.0;
    cfg.epochs = 12;
    cfg.batch_size = 16;
    cfg.seeds = {0};
    cfg.hidden_sizes = {16, 16};
    cfg.run_name = "blobs-test";
    return cfg;
}

} // namespace

TEST_CASE("config parsing") {
    const std::string text = R"(
# comment
data.source = blobs
blobs.classes = 4
method = fer
fer.tau = 5
epochs = 30
seeds = 0, 1, 2
)";
    const ExperimentConfig cfg = ExperimentConfig::from_string(text);
    CHECK(cfg.data_source == "blobs");
    CHECK(cfg.blobs_classes == 4);
    CHECK(cfg.loss.method == Method::Fer);
    CHECK(cfg.loss.tau == 5.0);
    CHECK(cfg.epochs == 30);
    CHECK(cfg.loss.total_epochs == 30);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2});

    CHECK_THROWS_AS(ExperimentConfig::from_string("no_such_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_string("epochs = \n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_string("epochs: 5\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_string("method = magic\n"), ConfigError);

    // canonical text renders back to an equivalent config
    const ExperimentConfig again = ExperimentConfig::from_string(cfg.to_text());
    CHECK(again.to_text() == cfg.to_text());
}

TEST_CASE("validation catches missing data before any compute") {
    ExperimentConfig cfg;
    cfg.data_source = "csv";
    cfg.data_path = "/definitely/not/here.csv";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = blobs_config();
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = blobs_config();
    cfg.seeds.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = blobs_config();
    cfg.train_frac = 0.9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("full-run determinism: identical config and seed, identical stream") {
    const ExperimentConfig cfg = blobs_config();
    const SeedResult a = run_seed(cfg, 3);
    const SeedResult b = run_seed(cfg, 3);
    CHECK(a.metrics_stream == b.metrics_stream); // bitwise
    CHECK(a.final_test_accuracy == b.final_test_accuracy);
    CHECK_FALSE(a.metrics_stream.empty());
}

TEST_CASE("std and fer with rho=0 produce identical streams") {
    ExperimentConfig std_cfg = blobs_config();
    std_cfg.loss.method = Method::Std;
    std_cfg.loss.rho = 0.0;

    ExperimentConfig fer_cfg = blobs_config();
    fer_cfg.loss.method = Method::Fer;
    fer_cfg.loss.rho = 0.0;

    for (std::uint64_t seed : {0ULL, 1ULL}) {
        const SeedResult s = run_seed(std_cfg, seed);
        const SeedResult f = run_seed(fer_cfg, seed);
        CHECK(s.metrics_stream == f.metrics_stream);
    }
}

TEST_CASE("metrics stream shape and schedule columns") {
    ExperimentConfig cfg = blobs_config();
    cfg.loss.method = Method::Fer;
    cfg.epochs = 9;
    const SeedResult r = run_seed(cfg, 1);
    CHECK(r.records.size() == 9);

    std::istringstream stream(r.metrics_stream);
    std::string line;
    int rows = 0;
    while (std::getline(stream, line)) {
        const auto j = nlohmann::json::parse(line);
        const int epoch = j.at("epoch").get<int>();
        const auto [alpha, beta] = alpha_beta(epoch, cfg.epochs, cfg.loss.rho);
        CHECK(j.at("alpha").get<double>() == alpha);
        CHECK(j.at("beta").get<double>() == beta);
        CHECK(j.at("eval_accuracy").is_number());
        CHECK(j.at("fe").is_number());
        CHECK(j.at("rfe").is_number());
        ++rows;
    }
    CHECK(rows == 9);
}

TEST_CASE("gate-branch count equals flagged entries seen at loss time") {
    ExperimentConfig cfg = blobs_config();
    cfg.loss.method = Method::Fer;
    const SeedResult r = run_seed(cfg, 2);
    bool someone_used_the_gate = false;
    for (const auto& rec : r.records) {
        CHECK(rec.cor_branch_uses == rec.flagged_at_loss);
        if (rec.cor_branch_uses > 0) someone_used_the_gate = true;
    }
    CHECK(someone_used_the_gate);
    // epoch 0 has no recorded behaviors yet
    CHECK(r.records.front().cor_branch_uses == 0);
}

TEST_CASE("well-separated blobs are learned nearly perfectly") {
    ExperimentConfig cfg = blobs_config();
    cfg.blobs_separation = 10.0;
    cfg.epochs = 20;
    const SeedResult r = run_seed(cfg, 0);
    CHECK(r.final_test_accuracy >= 0.99);
}

TEST_CASE("zero separation trains to chance level") {
    ExperimentConfig cfg = blobs_config();
    cfg.blobs_classes = 4;
    cfg.blobs_per_class = 100;
    cfg.blobs_separation = 0.0;
    cfg.epochs = 15;
    const SeedResult r = run_seed(cfg, 0);
    CHECK(r.final_test_accuracy == doctest::Approx(0.25).epsilon(0.45)); // 1/K +- 0.1 approx
    CHECK(std::abs(r.final_test_accuracy - 0.25) <= 0.1);
}

TEST_CASE("diverged training aborts with context") {
    ExperimentConfig cfg = blobs_config();
    cfg.learning_rate = 1e18;
    cfg.epochs = 5;
    try {
        run_seed(cfg, 0);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("run_experiment writes the artifact set") {
    const auto dir = std::filesystem::temp_directory_path() / "fer_harness_test";
    std::filesystem::remove_all(dir);

    ExperimentConfig cfg = blobs_config();
    cfg.loss.method = Method::Fer;
    cfg.seeds = {0, 1};
    cfg.output_dir = dir.string();
    const RunResult result = run_experiment(cfg);
    CHECK(result.per_seed.size() == 2);

    for (const char* name :
         {"config.txt", "summary.tsv", "timings.tsv", "seed0_metrics.jsonl", "seed0_history.txt",
          "seed0_model.ckpt", "seed0_behavior.bin", "seed0_manifest.json", "seed0_flip.json",
          "seed1_metrics.jsonl"})
        CHECK(std::filesystem::exists(dir / name));

    // the saved stream matches the in-memory one
    std::ifstream in(dir / "seed0_metrics.jsonl");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(bytes == result.per_seed[0].metrics_stream);

    // history round-trips into the same final flip report
    const PredictionHistory hist = PredictionHistory::load((dir / "seed0_history.txt").string());
    const FlipReport report = hist.flip_report(cfg.epochs - 1);
    CHECK(report.fe == result.per_seed[0].final_report.fe);
    CHECK(report.rfe == result.per_seed[0].final_report.rfe);

    std::filesystem::remove_all(dir);
}

TEST_CASE("compare pairs runs over identical data") {
    ExperimentConfig std_cfg = blobs_config();
    std_cfg.loss.method = Method::Std;
    std_cfg.seeds = {0, 1, 2};
    ExperimentConfig fer_cfg = std_cfg;
    fer_cfg.loss.method = Method::Fer;

    const RunResult a = run_experiment(std_cfg);
    const RunResult b = run_experiment(fer_cfg);

    const Comparison self = compare({a, a});
    CHECK(self.rows[1].delta_vs_baseline == 0.0);
    for (std::size_t i = 0; i < self.seeds.size(); ++i)
        CHECK(self.rows[0].final_per_seed[i] == self.rows[1].final_per_seed[i]);

    const Comparison cmp = compare({a, b});
    CHECK(cmp.rows.size() == 2);
    CHECK(cmp.rows[1].delta_vs_baseline ==
          doctest::Approx(b.mean_final - a.mean_final).epsilon(1e-12));
    const std::string tsv = cmp.to_tsv();
    CHECK(tsv.find("std") != std::string::npos);
    CHECK(tsv.find("fer") != std::string::npos);

    ExperimentConfig other_seeds = fer_cfg;
    other_seeds.seeds = {5, 6, 7};
    const RunResult c = run_experiment(other_seeds);
    CHECK_THROWS_AS(compare({a, c}), ConfigError);

    ExperimentConfig other_data = fer_cfg;
    other_data.blobs_separation = 9.0;
    const RunResult d = run_experiment(other_data);
    CHECK_THROWS_AS(compare({a, d}), ConfigError);
}

TEST_CASE("iris protocol smoke run") {
    ExperimentConfig cfg;
    cfg.data_source = "csv";
    cfg.data_path = std::string(FER_SOURCE_DIR) + "/data/iris.csv";
    cfg.schema.has_header = true;
    cfg.epochs = 10;
    cfg.seeds = {0};
    cfg.run_name = "iris-smoke";
    cfg.validate();
    const SeedResult r = run_seed(cfg, 0);
    CHECK(r.records.size() == 10);
    CHECK(r.final_test_accuracy > 0.5); // sanity: far above the 1/3 chance level
}
