#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "graphevo/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

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

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

double mean_consecutive_l1(const std::vector<LongitudinalSample>& samples) {
    double total = 0.0;
    std::size_t pairs = 0;
    for (const LongitudinalSample& s : samples) {
        for (std::size_t t = 1; t < s.graphs.size(); ++t) {
            for (std::size_t k = 0; k < s.graphs[t].weights.size(); ++k) {
                total += std::fabs(s.graphs[t].weights[k] - s.graphs[t - 1].weights[k]);
            }
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

} // namespace

TEST_CASE("synthetic generation shape, validity and determinism") {
    SyntheticConfig cfg;
    cfg.n_subjects = 4;
    cfg.n_r = 7;
    cfg.timepoints = 3;
    cfg.seed = 123;

    auto a = generate_synthetic(cfg);
    REQUIRE(a.size() == 4);
    CHECK(a[0].subject_id == "s000");
    CHECK(a[3].subject_id == "s003");
    for (const LongitudinalSample& s : a) {
        REQUIRE(s.graphs.size() == 3);
        for (const ConnectivityMatrix& g : s.graphs) {
            CHECK(g.n_r == 7);
            CHECK_NOTHROW(g.check());
        }
    }

    auto b = generate_synthetic(cfg);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t t = 0; t < 3; ++t) CHECK(a[i].graphs[t].weights == b[i].graphs[t].weights);
}

TEST_CASE("frozen dynamics when both scales are zero") {
    SyntheticConfig cfg;
    cfg.n_subjects = 2;
    cfg.n_r = 6;
    cfg.timepoints = 4;
    cfg.drift_scale = 0.0;
    cfg.noise_scale = 0.0;
    for (const LongitudinalSample& s : generate_synthetic(cfg)) {
        for (std::size_t t = 1; t < s.graphs.size(); ++t) {
            CHECK(s.graphs[t].weights == s.graphs[0].weights);
        }
    }
}

TEST_CASE("consecutive-timepoint distance grows with drift scale") {
    SyntheticConfig cfg;
    cfg.n_subjects = 5;
    cfg.n_r = 10;
    cfg.timepoints = 3;
    cfg.noise_scale = 0.01;
    cfg.seed = 7;

    std::vector<double> distances;
    for (double drift : {0.0, 0.05, 0.1}) {
        cfg.drift_scale = drift;
        distances.push_back(mean_consecutive_l1(generate_synthetic(cfg)));
    }
    CHECK(distances[0] < distances[1]);
    CHECK(distances[1] < distances[2]);
}

TEST_CASE("synthetic config rejections") {
    SyntheticConfig cfg;
    cfg.n_subjects = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = SyntheticConfig{};
    cfg.timepoints = 1;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = SyntheticConfig{};
    cfg.drift_scale = -0.1;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
    cfg = SyntheticConfig{};
    cfg.sparsity = 1.5;
    CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
}

TEST_CASE("matrix csv round trip is exact") {
    TempDir dir("graphevo_csv_test");
    SyntheticConfig cfg;
    cfg.n_subjects = 1;
    cfg.n_r = 9;
    auto g = generate_synthetic(cfg)[0].graphs[0];
    save_matrix_csv(dir.path / "m.csv", g);
    ConnectivityMatrix back = load_matrix_csv(dir.path / "m.csv");
    CHECK(back.weights == g.weights);
}

TEST_CASE("matrix csv rejections name the offending cell") {
    TempDir dir("graphevo_csv_bad_test");

    write_file(dir.path / "range.csv", "0,1.5\n1.5,0\n");
    CHECK_THROWS_WITH_AS(load_matrix_csv(dir.path / "range.csv"),
                         doctest::Contains("row 1 column 2"), DataError);

    write_file(dir.path / "diag.csv", "0.3,0.5\n0.5,0\n");
    CHECK_THROWS_WITH_AS(load_matrix_csv(dir.path / "diag.csv"),
                         doctest::Contains("row 1 column 1"), DataError);

    write_file(dir.path / "asym.csv", "0,0.5\n0.2,0\n");
    CHECK_THROWS_WITH_AS(load_matrix_csv(dir.path / "asym.csv"), doctest::Contains("mirror"),
                         DataError);

    write_file(dir.path / "ragged.csv", "0,0.5\n0.5,0,0.1\n");
    CHECK_THROWS_WITH_AS(load_matrix_csv(dir.path / "ragged.csv"), doctest::Contains("columns"),
                         DataError);

    write_file(dir.path / "text.csv", "0,zebra\nzebra,0\n");
    CHECK_THROWS_WITH_AS(load_matrix_csv(dir.path / "text.csv"), doctest::Contains("zebra"),
                         DataError);

    CHECK_THROWS_AS(load_matrix_csv(dir.path / "missing.csv"), DataError);
}

TEST_CASE("tiny asymmetry is averaged away on load") {
    TempDir dir("graphevo_csv_sym_test");
    write_file(dir.path / "near.csv", "0,0.5000000000004\n0.4999999999996,0\n");
    ConnectivityMatrix g = load_matrix_csv(dir.path / "near.csv");
    CHECK(g.at(0, 1) == 0.5);
    CHECK(g.at(1, 0) == 0.5);
    CHECK_NOTHROW(g.check());

    // value a hair above 1 within tolerance snaps onto the boundary
    write_file(dir.path / "snap.csv", "0,1.0000000000004\n1.0000000000004,0\n");
    CHECK(load_matrix_csv(dir.path / "snap.csv").at(0, 1) == 1.0);
}

TEST_CASE("dataset round trip preserves every value") {
    TempDir dir("graphevo_dataset_test");
    SyntheticConfig cfg;
    cfg.n_subjects = 3;
    cfg.n_r = 6;
    cfg.timepoints = 3;
    auto samples = generate_synthetic(cfg);
    fs::path manifest = save_dataset(dir.path, samples);
    CHECK(manifest.filename() == "manifest.txt");

    std::size_t csvs = 0;
    for (const auto& entry : fs::directory_iterator(dir.path)) {
        if (entry.path().extension() == ".csv") ++csvs;
    }
    CHECK(csvs == 9);

    auto back = load_dataset(manifest);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].subject_id == samples[i].subject_id);
        REQUIRE(back[i].graphs.size() == samples[i].graphs.size());
        for (std::size_t t = 0; t < back[i].graphs.size(); ++t) {
            CHECK(back[i].graphs[t].weights == samples[i].graphs[t].weights);
        }
    }
}

TEST_CASE("subjects come back ordered by id") {
    TempDir dir("graphevo_order_test");
    write_file(dir.path / "g.csv", "0,0.5\n0.5,0\n");
    write_file(dir.path / "manifest.txt", "n_r 2\ntimepoints 2\n"
                                          "subject zeta g.csv g.csv\n"
                                          "subject alpha g.csv g.csv\n");
    auto samples = load_dataset(dir.path / "manifest.txt");
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].subject_id == "alpha");
    CHECK(samples[1].subject_id == "zeta");
}

TEST_CASE("manifest rejections") {
    TempDir dir("graphevo_manifest_test");
    write_file(dir.path / "g.csv", "0,0.5\n0.5,0\n");

    write_file(dir.path / "empty.txt", "n_r 2\ntimepoints 2\n# no subjects\n");
    CHECK(load_dataset(dir.path / "empty.txt").empty());

    write_file(dir.path / "early.txt", "subject a g.csv g.csv\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path / "early.txt"), doctest::Contains("line 1"), DataError);

    write_file(dir.path / "unknown.txt", "n_r 2\ntimepoints 2\nregions 3\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path / "unknown.txt"), doctest::Contains("regions"),
                         DataError);

    write_file(dir.path / "count.txt", "n_r 2\ntimepoints 3\nsubject a g.csv g.csv\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path / "count.txt"), doctest::Contains("declares 3"),
                         DataError);

    write_file(dir.path / "dup.txt",
               "n_r 2\ntimepoints 2\nsubject a g.csv g.csv\nsubject a g.csv g.csv\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path / "dup.txt"), doctest::Contains("duplicate"), DataError);

    write_file(dir.path / "wrongsize.txt", "n_r 5\ntimepoints 2\nsubject a g.csv g.csv\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path / "wrongsize.txt"), doctest::Contains("expected 5"),
                         DataError);

    CHECK_THROWS_AS(load_dataset(dir.path / "nonexistent.txt"), DataError);
}

TEST_CASE("saving an empty dataset is refused") {
    CHECK_THROWS_AS(save_dataset(fs::temp_directory_path() / "graphevo_never", {}), DataError);
}
