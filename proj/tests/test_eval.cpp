#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "graphevo/data.hpp"
#include "graphevo/eval.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

using namespace graphevo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// zeroing every convolution array reduces each generator to its skip
// connection, so predictions equal the baseline exactly
void make_identity(CascadeTrainer& trainer) {
    for (std::size_t s = 0; s < trainer.stages(); ++s) {
        Generator& g = trainer.generator(s);
        for (EccLayer* layer : {&g.ecc1, &g.ecc2, &g.ecc3}) {
            std::fill(layer->filter_weight.value().begin(), layer->filter_weight.value().end(), 0.0);
            std::fill(layer->filter_bias.value().begin(), layer->filter_bias.value().end(), 0.0);
            std::fill(layer->bias.value().begin(), layer->bias.value().end(), 0.0);
        }
        for (BatchNorm* bn : {&g.bn1, &g.bn2, &g.bn3}) {
            std::fill(bn->beta.value().begin(), bn->beta.value().end(), 0.0);
        }
    }
}

EvalReport sample_report() {
    EvalReport r;
    r.config_hash = "abc123";
    r.seed = 7;
    r.rows = {
        {"full", 1, 0, 0.05}, {"full", 1, 1, 0.07}, {"full", 1, 2, 0.06},
        {"full", 2, 0, 0.09}, {"full", 2, 1, 0.11}, {"full", 2, 2, 0.10},
        {"no_kl", 1, 0, 0.08}, {"no_kl", 1, 1, 0.10}, {"no_kl", 1, 2, 0.12},
        {"no_kl", 2, 0, 0.12}, {"no_kl", 2, 1, 0.14}, {"no_kl", 2, 2, 0.16},
    };
    return r;
}

} // namespace

TEST_CASE("identity generators on frozen data score a perfect MAE") {
    SyntheticConfig data_cfg;
    data_cfg.n_subjects = 3;
    data_cfg.n_r = 6;
    data_cfg.timepoints = 3;
    data_cfg.drift_scale = 0.0;
    data_cfg.noise_scale = 0.0;
    auto samples = generate_synthetic(data_cfg);

    TrainConfig cfg;
    cfg.timepoints = 2;
    CascadeTrainer trainer(6, cfg);
    make_identity(trainer);

    auto maes = evaluate_fold(trainer, samples);
    REQUIRE(maes.size() == 2);
    CHECK(maes[0] == 0.0);
    CHECK(maes[1] == 0.0);
}

TEST_CASE("evaluation rejects unusable test sets") {
    TrainConfig cfg;
    cfg.timepoints = 2;
    CascadeTrainer trainer(6, cfg);
    CHECK_THROWS_AS(evaluate_fold(trainer, {}), DataError);

    SyntheticConfig data_cfg;
    data_cfg.n_subjects = 1;
    data_cfg.n_r = 6;
    data_cfg.timepoints = 2; // one follow-up, trainer predicts two
    auto samples = generate_synthetic(data_cfg);
    CHECK_THROWS_WITH_AS(evaluate_fold(trainer, samples), doctest::Contains("s000"), DataError);
}

TEST_CASE("evaluation leaves checkpoints byte-identical") {
    SyntheticConfig data_cfg;
    data_cfg.n_subjects = 2;
    data_cfg.n_r = 5;
    data_cfg.timepoints = 2;
    auto samples = generate_synthetic(data_cfg);

    TrainConfig cfg;
    cfg.timepoints = 1;
    CascadeTrainer trainer(5, cfg);

    TempDir dir("graphevo_eval_mut_test");
    trainer.save(dir.path / "before", "h");
    evaluate_fold(trainer, samples);
    trainer.save(dir.path / "after", "h");

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp(dir.path / "before" / "stage1.ckpt") == slurp(dir.path / "after" / "stage1.ckpt"));
}

TEST_CASE("aggregates compute mean, population std and best") {
    EvalReport report = sample_report();
    auto aggs = report.aggregates();
    REQUIRE(aggs.size() == 4);

    CHECK(aggs[0].variant == "full");
    CHECK(aggs[0].timepoint == 1);
    CHECK(aggs[0].mean == doctest::Approx(0.06).epsilon(1e-15));
    CHECK(aggs[0].std_dev == doctest::Approx(std::sqrt(2.0 / 3.0) * 0.01).epsilon(1e-12));
    CHECK(aggs[0].best == 0.05);

    for (const EvalAggregate& a : aggs) {
        CHECK(a.mean >= a.best);
        CHECK(a.std_dev >= 0.0);
    }
    // variants keep first-appearance order, timepoints ascend
    CHECK(aggs[1].variant == "full");
    CHECK(aggs[1].timepoint == 2);
    CHECK(aggs[2].variant == "no_kl");
}

TEST_CASE("report csv round trip is exact") {
    TempDir dir("graphevo_report_csv_test");
    EvalReport report = sample_report();
    write_report_csv(dir.path / "report.csv", report);

    EvalReport back = read_report_csv(dir.path / "report.csv");
    REQUIRE(back.rows.size() == report.rows.size());
    for (std::size_t i = 0; i < back.rows.size(); ++i) {
        CHECK(back.rows[i].variant == report.rows[i].variant);
        CHECK(back.rows[i].timepoint == report.rows[i].timepoint);
        CHECK(back.rows[i].fold == report.rows[i].fold);
        CHECK(back.rows[i].mae == report.rows[i].mae);
    }

    // aggregates recomputed from the file match the originals exactly
    auto a = report.aggregates();
    auto b = back.aggregates();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].mean == b[i].mean);
        CHECK(a[i].std_dev == b[i].std_dev);
        CHECK(a[i].best == b[i].best);
    }

    std::ofstream(dir.path / "bad.csv") << "not,a,report\n";
    CHECK_THROWS_AS(read_report_csv(dir.path / "bad.csv"), DataError);
    std::ofstream(dir.path / "short.csv") << "variant,timepoint,fold,mae\nfull,1\n";
    CHECK_THROWS_WITH_AS(read_report_csv(dir.path / "short.csv"), doctest::Contains("line 2"),
                         DataError);
}

TEST_CASE("report json carries rows and aggregates") {
    TempDir dir("graphevo_report_json_test");
    EvalReport report = sample_report();
    write_report_json(dir.path / "report.json", report);

    std::ifstream in(dir.path / "report.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc.at("config_hash") == "abc123");
    CHECK(doc.at("seed") == 7);
    REQUIRE(doc.at("rows").size() == 12);
    CHECK(doc.at("rows")[0].at("mae").get<double>() == 0.05);
    REQUIRE(doc.at("aggregates").size() == 4);
    CHECK(doc.at("aggregates")[0].at("mean").get<double>() == report.aggregates()[0].mean);
    CHECK(doc.at("aggregates")[0].at("best").get<double>() == 0.05);
}

TEST_CASE("table shape mirrors variants by timepoints") {
    EvalReport report = sample_report();
    report.rows.push_back({"no_kl_plus_topology", 1, 0, 0.2});
    report.rows.push_back({"no_kl_plus_topology", 2, 0, 0.3});
    std::string table = render_report_table(report);

    std::size_t lines = std::count(table.begin(), table.end(), '\n');
    CHECK(lines == 4); // header plus one row per variant
    CHECK(table.find("t1 mean +/- std") != std::string::npos);
    CHECK(table.find("t1 best") != std::string::npos);
    CHECK(table.find("t2 mean +/- std") != std::string::npos);
    CHECK(table.find("t2 best") != std::string::npos);
    CHECK(table.find("full") != std::string::npos);
    CHECK(table.find("no_kl_plus_topology") != std::string::npos);
    CHECK(table.find("0.06000 +/- ") != std::string::npos);

    EvalReport empty;
    std::string header_only = render_report_table(empty);
    CHECK(std::count(header_only.begin(), header_only.end(), '\n') == 1);
}
