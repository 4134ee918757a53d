// Command-line front end: synthetic data generation, cascade training over
// k folds, evaluation reporting, gradient verification, and single-baseline
// prediction. Exit codes: 0 success, 1 usage or bad configuration, 2 data or
// I/O problem, 3 numeric failure (diverged loss, failed gradient check).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "graphevo/data.hpp"
#include "graphevo/errors.hpp"
#include "graphevo/eval.hpp"
#include "graphevo/gnn.hpp"
#include "graphevo/losses.hpp"
#include "graphevo/training.hpp"
#include "graphevo/verification.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace graphevo;

namespace {

constexpr const char* kToolVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// Default output root: $GRAPHEVO_OUT when set, the working directory otherwise.
fs::path output_root() {
    const char* env = std::getenv("GRAPHEVO_OUT");
    return fs::path(env != nullptr && *env != '\0' ? env : ".");
}

fs::path resolve_out(const std::string& flag, const char* fallback_name) {
    if (!flag.empty()) return fs::path(flag);
    return output_root() / fallback_name;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_json_file(const fs::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(1) << '\n';
    if (!out.good()) throw DataError("cannot write " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
}

// The hash is taken over the canonical dump (keys sorted) before the hash
// field itself is added, so it identifies the resolved configuration.
std::string seal_config(json& doc) {
    doc["tool_version"] = kToolVersion;
    std::string hash = fnv1a_hex(doc.dump());
    doc["config_hash"] = hash;
    return hash;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::vector<LossVariant> parse_variants(const std::string& csv) {
    std::vector<LossVariant> variants;
    for (const std::string& name : split_list(csv)) {
        LossVariant v = variant_from_name(name);
        for (LossVariant seen : variants) {
            if (seen == v) throw ConfigError("variant listed twice: " + name);
        }
        variants.push_back(v);
    }
    return variants;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOpts {
    SyntheticConfig cfg;
    std::string out;
};

int run_gen_data(const GenDataOpts& opts) {
    opts.cfg.check();
    fs::path dir = resolve_out(opts.out, "dataset");
    ensure_dir(dir);

    std::vector<LongitudinalSample> samples = generate_synthetic(opts.cfg);
    fs::path manifest = save_dataset(dir, samples);

    json doc{{"command", "gen-data"},
             {"subjects", opts.cfg.n_subjects},
             {"rois", opts.cfg.n_r},
             {"timepoints", opts.cfg.timepoints},
             {"drift_scale", opts.cfg.drift_scale},
             {"noise_scale", opts.cfg.noise_scale},
             {"sparsity", opts.cfg.sparsity},
             {"seed", opts.cfg.seed}};
    seal_config(doc);
    write_json_file(dir / "config.json", doc);

    std::printf("%s\n", manifest.string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string data;
    std::string out;
    std::string variants = "full";
    TrainConfig cfg;      // cfg.timepoints is resolved from the data
    std::size_t stages = 0; // 0: predict every follow-up the data holds
};

json train_config_json(const TrainOpts& opts, const TrainConfig& cfg, std::size_t n_subjects,
                       std::size_t n_r, std::size_t data_timepoints,
                       const std::vector<LossVariant>& variants) {
    json names = json::array();
    for (LossVariant v : variants) names.push_back(variant_name(v));
    return json{{"command", "train"},
                {"data", opts.data},
                {"n_subjects", n_subjects},
                {"n_r", n_r},
                {"timepoints", data_timepoints},
                {"stages", cfg.timepoints},
                {"epochs", cfg.epochs},
                {"folds", cfg.folds},
                {"hidden", cfg.hidden},
                {"dropout", cfg.dropout},
                {"sigma_floor", cfg.sigma_floor},
                {"chain_backprop", cfg.chain_backprop},
                {"lambda1", cfg.weights.lambda1},
                {"lambda2", cfg.weights.lambda2},
                {"lambda3", cfg.weights.lambda3},
                {"lr_g", cfg.lr_g},
                {"lr_d", cfg.lr_d},
                {"beta1", cfg.beta1},
                {"beta2", cfg.beta2},
                {"weight_decay", cfg.weight_decay},
                {"seed", cfg.seed},
                {"variants", names}};
}

TrainConfig config_from_json(const json& doc) {
    TrainConfig cfg;
    cfg.timepoints = doc.at("stages").get<std::size_t>();
    cfg.epochs = doc.at("epochs").get<std::size_t>();
    cfg.folds = doc.at("folds").get<std::size_t>();
    cfg.hidden = doc.at("hidden").get<std::size_t>();
    cfg.dropout = doc.at("dropout").get<double>();
    cfg.sigma_floor = doc.at("sigma_floor").get<double>();
    cfg.chain_backprop = doc.at("chain_backprop").get<bool>();
    cfg.weights.lambda1 = doc.at("lambda1").get<double>();
    cfg.weights.lambda2 = doc.at("lambda2").get<double>();
    cfg.weights.lambda3 = doc.at("lambda3").get<double>();
    cfg.lr_g = doc.at("lr_g").get<double>();
    cfg.lr_d = doc.at("lr_d").get<double>();
    cfg.beta1 = doc.at("beta1").get<double>();
    cfg.beta2 = doc.at("beta2").get<double>();
    cfg.weight_decay = doc.at("weight_decay").get<double>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    return cfg;
}

std::vector<LongitudinalSample> pick_samples(const std::vector<LongitudinalSample>& all,
                                             const std::vector<std::size_t>& ids) {
    std::vector<LongitudinalSample> out;
    out.reserve(ids.size());
    for (std::size_t id : ids) out.push_back(all.at(id));
    return out;
}

int run_train(const TrainOpts& opts) {
    std::vector<LongitudinalSample> samples = load_dataset(opts.data);
    if (samples.empty()) throw DataError("dataset has no subjects: " + opts.data);
    std::size_t n_r = samples.front().graphs.front().n_r;
    std::size_t data_timepoints = samples.front().timepoints();
    if (opts.stages + 1 > data_timepoints) {
        throw ConfigError("dataset holds " + std::to_string(data_timepoints - 1) +
                          " follow-ups, cannot train " + std::to_string(opts.stages) + " stages");
    }

    std::vector<LossVariant> variants = parse_variants(opts.variants);
    TrainConfig base = opts.cfg;
    base.timepoints = opts.stages == 0 ? data_timepoints - 1 : opts.stages;
    base.check();

    std::vector<FoldSplit> splits = kfold_split(samples.size(), base.folds, base.seed);

    fs::path run_dir = resolve_out(opts.out, "run");
    ensure_dir(run_dir);

    json doc = train_config_json(opts, base, samples.size(), n_r, data_timepoints, variants);
    std::string hash = seal_config(doc);
    write_json_file(run_dir / "config.json", doc);

    json splits_doc{{"n_subjects", samples.size()}, {"folds", base.folds}, {"seed", base.seed}};
    splits_doc["splits"] = json::array();
    for (const FoldSplit& s : splits) {
        splits_doc["splits"].push_back(json{{"train", s.train_ids}, {"test", s.test_ids}});
    }
    write_json_file(run_dir / "splits.json", splits_doc);

    for (LossVariant variant : variants) {
        TrainConfig cfg = base;
        cfg.weights.variant = variant;
        for (std::size_t k = 0; k < splits.size(); ++k) {
            cfg.seed = base.seed + k; // distinct stream per fold, shared across variants
            CascadeTrainer trainer(n_r, cfg);
            std::vector<LongitudinalSample> train_samples = pick_samples(samples, splits[k].train_ids);
            std::fprintf(stderr, "[train] %s fold %zu: %zu subjects, %zu stages, %zu epochs\n",
                         variant_name(variant), k, train_samples.size(), trainer.stages(), cfg.epochs);
            std::vector<LossRecord> history = trainer.train(train_samples);

            fs::path fold_dir = run_dir / variant_name(variant) / ("fold" + std::to_string(k));
            ensure_dir(fold_dir);
            write_loss_history(fold_dir / "loss_history.csv", history);
            trainer.save(fold_dir, hash);
            if (!history.empty()) {
                const LossRecord& last = history.back();
                std::fprintf(stderr, "[train] %s fold %zu done: d_loss=%.4f g_total=%.4f\n",
                             variant_name(variant), k, last.d_loss, last.g_total);
            }
        }
    }

    std::printf("%s\n", run_dir.string().c_str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
    std::string run;
    std::string data;
    std::string formats = "csv,json,table";
};

int run_evaluate(const EvaluateOpts& opts) {
    fs::path run_dir = resolve_out(opts.run, "run");
    json doc = read_json_file(run_dir / "config.json");

    std::set<std::string> formats;
    for (const std::string& f : split_list(opts.formats)) {
        if (f != "csv" && f != "json" && f != "table") {
            throw ConfigError("unknown format: '" + f + "' (expected csv, json or table)");
        }
        formats.insert(f);
    }

    std::string data_path = opts.data.empty() ? doc.at("data").get<std::string>() : opts.data;
    std::vector<LongitudinalSample> samples = load_dataset(data_path);
    if (samples.size() != doc.at("n_subjects").get<std::size_t>()) {
        throw DataError("dataset has " + std::to_string(samples.size()) + " subjects but the run was trained on " +
                        std::to_string(doc.at("n_subjects").get<std::size_t>()));
    }
    std::size_t n_r = doc.at("n_r").get<std::size_t>();
    std::string hash = doc.at("config_hash").get<std::string>();

    TrainConfig base = config_from_json(doc);
    std::vector<FoldSplit> splits = kfold_split(samples.size(), base.folds, base.seed);

    EvalReport report;
    report.config_hash = hash;
    report.seed = base.seed;

    for (const json& name : doc.at("variants")) {
        std::string variant = name.get<std::string>();
        TrainConfig cfg = base;
        cfg.weights.variant = variant_from_name(variant);
        // fold -> per-timepoint MAE, gathered first so rows can group by timepoint
        std::vector<std::vector<double>> fold_maes;
        for (std::size_t k = 0; k < splits.size(); ++k) {
            cfg.seed = base.seed + k;
            CascadeTrainer trainer(n_r, cfg);
            trainer.load(run_dir / variant / ("fold" + std::to_string(k)), &hash);
            fold_maes.push_back(evaluate_fold(trainer, pick_samples(samples, splits[k].test_ids)));
        }
        for (std::size_t t = 1; t <= base.timepoints; ++t) {
            for (std::size_t k = 0; k < fold_maes.size(); ++k) {
                report.rows.push_back(EvalRow{variant, t, k, fold_maes[k][t - 1]});
            }
        }
    }

    if (formats.count("csv") != 0) {
        write_report_csv(run_dir / "report.csv", report);
        std::fprintf(stderr, "[evaluate] wrote %s\n", (run_dir / "report.csv").string().c_str());
    }
    if (formats.count("json") != 0) {
        write_report_json(run_dir / "report.json", report);
        std::fprintf(stderr, "[evaluate] wrote %s\n", (run_dir / "report.json").string().c_str());
    }
    if (formats.count("table") != 0) {
        std::string table = render_report_table(report);
        std::ofstream out(run_dir / "report.txt");
        if (!out) throw DataError("cannot write " + (run_dir / "report.txt").string());
        out << table;
        std::fputs(table.c_str(), stdout);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOpts {
    double tol = 1e-3;
    double tol_linear = 1e-5;
    double step = 1e-4;
    std::uint64_t seed = 13;
};

int run_gradcheck(const GradcheckOpts& opts) {
    std::vector<ComponentCheck> checks = run_gradient_checks(opts.seed, opts.tol, opts.tol_linear, opts.step);
    std::printf("%-18s %-14s %-10s %s\n", "component", "max_rel_err", "tol", "status");
    for (const ComponentCheck& c : checks) {
        std::printf("%-18s %-14.6e %-10.1e %s\n", c.name.c_str(), c.max_rel_err, c.tol,
                    c.pass ? "pass" : "FAIL");
    }
    if (!all_pass(checks)) {
        std::fprintf(stderr, "gradient check failed\n");
        return kExitNumeric;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
    std::string run;
    std::string baseline;
    std::string variant = "full";
    std::size_t fold = 0;
    std::string out;
};

int run_predict(const PredictOpts& opts) {
    fs::path run_dir = resolve_out(opts.run, "run");
    json doc = read_json_file(run_dir / "config.json");
    std::size_t n_r = doc.at("n_r").get<std::size_t>();
    std::string hash = doc.at("config_hash").get<std::string>();

    TrainConfig cfg = config_from_json(doc);
    cfg.weights.variant = variant_from_name(opts.variant);
    if (opts.fold >= cfg.folds) {
        throw ConfigError("fold " + std::to_string(opts.fold) + " out of range (run has " +
                          std::to_string(cfg.folds) + " folds)");
    }

    ConnectivityMatrix baseline = load_matrix_csv(opts.baseline);
    if (baseline.n_r != n_r) {
        throw DataError("baseline has " + std::to_string(baseline.n_r) + " regions but the run expects " +
                        std::to_string(n_r));
    }

    cfg.seed = cfg.seed + opts.fold;
    CascadeTrainer trainer(n_r, cfg);
    trainer.load(run_dir / opts.variant / ("fold" + std::to_string(opts.fold)), &hash);
    std::vector<ConnectivityMatrix> predictions = trainer.predict(baseline);

    fs::path out_dir = resolve_out(opts.out, "prediction");
    ensure_dir(out_dir);
    json info{{"command", "predict"},
              {"run", run_dir.string()},
              {"variant", opts.variant},
              {"fold", opts.fold},
              {"baseline", opts.baseline},
              {"train_config_hash", hash}};
    seal_config(info);
    write_json_file(out_dir / "config.json", info);

    for (std::size_t t = 0; t < predictions.size(); ++t) {
        fs::path path = out_dir / ("pred_t" + std::to_string(t + 1) + ".csv");
        save_matrix_csv(path, predictions[t]);
        std::printf("%s\n", path.string().c_str());
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Longitudinal brain graph evolution: cascaded graph-GAN training and prediction"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    GenDataOpts gen;
    CLI::App* cmd_gen = app.add_subcommand("gen-data", "Generate a synthetic longitudinal dataset");
    cmd_gen->add_option("--subjects", gen.cfg.n_subjects, "Number of subjects")->capture_default_str();
    cmd_gen->add_option("--rois", gen.cfg.n_r, "Regions per graph")->capture_default_str();
    cmd_gen->add_option("--timepoints", gen.cfg.timepoints, "Observations per subject, baseline included")->capture_default_str();
    cmd_gen->add_option("--drift", gen.cfg.drift_scale, "Step size of each drifting edge")->capture_default_str();
    cmd_gen->add_option("--noise", gen.cfg.noise_scale, "Std of the per-edge Gaussian noise")->capture_default_str();
    cmd_gen->add_option("--sparsity", gen.cfg.sparsity, "Fraction of edges drifting per step")->capture_default_str();
    cmd_gen->add_option("--seed", gen.cfg.seed, "Random seed")->capture_default_str();
    cmd_gen->add_option("--out", gen.out, "Dataset directory (default: $GRAPHEVO_OUT/dataset)");

    TrainOpts tr;
    CLI::App* cmd_train = app.add_subcommand("train", "Train the cascade over k folds");
    cmd_train->add_option("--data", tr.data, "Dataset manifest")->required();
    cmd_train->add_option("--out", tr.out, "Run directory (default: $GRAPHEVO_OUT/run)");
    cmd_train->add_option("--variants,--variant", tr.variants,
                          "Comma-separated loss variants: full, no_kl, no_kl_plus_topology")->capture_default_str();
    cmd_train->add_option("--epochs", tr.cfg.epochs, "Training epochs")->capture_default_str();
    cmd_train->add_option("--folds", tr.cfg.folds, "Cross-validation folds")->capture_default_str();
    cmd_train->add_option("--stages", tr.stages, "Follow-ups to predict (0: all in the data)")->capture_default_str();
    cmd_train->add_option("--lambda1", tr.cfg.weights.lambda1, "Adversarial loss weight")->capture_default_str();
    cmd_train->add_option("--lambda2", tr.cfg.weights.lambda2, "l1 loss weight")->capture_default_str();
    cmd_train->add_option("--lambda3", tr.cfg.weights.lambda3, "KL (or topology) loss weight")->capture_default_str();
    cmd_train->add_option("--lr-g", tr.cfg.lr_g, "Generator learning rate")->capture_default_str();
    cmd_train->add_option("--lr-d", tr.cfg.lr_d, "Discriminator learning rate")->capture_default_str();
    cmd_train->add_option("--beta1", tr.cfg.beta1, "Adam beta1")->capture_default_str();
    cmd_train->add_option("--beta2", tr.cfg.beta2, "Adam beta2")->capture_default_str();
    cmd_train->add_option("--weight-decay", tr.cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
    cmd_train->add_option("--dropout", tr.cfg.dropout, "Hidden-layer dropout rate")->capture_default_str();
    cmd_train->add_option("--hidden", tr.cfg.hidden, "Hidden width (0: region count)")->capture_default_str();
    cmd_train->add_option("--sigma-floor", tr.cfg.sigma_floor, "Floor for per-node weight stds")->capture_default_str();
    cmd_train->add_option("--seed", tr.cfg.seed, "Base random seed; fold k trains with seed+k")->capture_default_str();
    cmd_train->add_flag_function("--no-chain-backprop",
                                 [&tr](std::int64_t) { tr.cfg.chain_backprop = false; },
                                 "Detach stage inputs so later losses stay within their stage");

    EvaluateOpts ev;
    CLI::App* cmd_eval = app.add_subcommand("evaluate", "Compute per-fold test MAE for a finished run");
    cmd_eval->add_option("--run", ev.run, "Run directory (default: $GRAPHEVO_OUT/run)");
    cmd_eval->add_option("--data", ev.data, "Dataset manifest (default: the one recorded in the run)");
    cmd_eval->add_option("--format", ev.formats, "Comma-separated outputs: csv, json, table")->capture_default_str();

    GradcheckOpts gc;
    CLI::App* cmd_gc = app.add_subcommand("gradcheck", "Verify analytic gradients against central differences");
    cmd_gc->add_option("--tol", gc.tol, "Relative tolerance")->capture_default_str();
    cmd_gc->add_option("--tol-linear", gc.tol_linear, "Tolerance for purely linear paths")->capture_default_str();
    cmd_gc->add_option("--step", gc.step, "Finite-difference step")->capture_default_str();
    cmd_gc->add_option("--seed", gc.seed, "Seed for the random instances")->capture_default_str();

    PredictOpts pr;
    CLI::App* cmd_pred = app.add_subcommand("predict", "Roll a trained cascade from one baseline CSV");
    cmd_pred->add_option("--run", pr.run, "Run directory (default: $GRAPHEVO_OUT/run)");
    cmd_pred->add_option("--baseline", pr.baseline, "Baseline connectivity CSV")->required();
    cmd_pred->add_option("--variant", pr.variant, "Trained variant to load")->capture_default_str();
    cmd_pred->add_option("--fold", pr.fold, "Fold whose checkpoints to load")->capture_default_str();
    cmd_pred->add_option("--out", pr.out, "Output directory (default: $GRAPHEVO_OUT/prediction)");

    int rc = kExitOk;
    cmd_gen->callback([&] { rc = run_gen_data(gen); });
    cmd_train->callback([&] { rc = run_train(tr); });
    cmd_eval->callback([&] { rc = run_evaluate(ev); });
    cmd_gc->callback([&] { rc = run_gradcheck(gc); });
    cmd_pred->callback([&] { rc = run_predict(pr); });

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            int code = app.exit(e);
            return code == 0 ? kExitOk : kExitUsage;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
    return rc;
}
