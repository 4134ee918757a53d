// Python bindings. Graphs cross the boundary as n x n float64 numpy arrays;
// everything else is plain scalars, strings, and (subject_id, [graphs])
// tuples, so the module has no wrapper types of its own beyond the trainer.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "graphevo/data.hpp"
#include "graphevo/eval.hpp"
#include "graphevo/losses.hpp"
#include "graphevo/training.hpp"
#include "graphevo/verification.hpp"

namespace py = pybind11;
using namespace graphevo;

namespace {

ConnectivityMatrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) {
        throw DimensionError("expected a square 2-D array, got shape (" +
                             std::to_string(a.ndim() > 0 ? a.shape(0) : 0) + ", ...)");
    }
    std::size_t n = static_cast<std::size_t>(a.shape(0));
    std::vector<double> w(a.data(), a.data() + n * n);
    return ConnectivityMatrix(n, std::move(w));
}

py::array_t<double> to_array(const ConnectivityMatrix& g) {
    py::array_t<double> out({g.n_r, g.n_r});
    std::copy(g.weights.begin(), g.weights.end(), out.mutable_data());
    return out;
}

using PySample = std::pair<std::string, std::vector<py::array_t<double>>>;

std::vector<LongitudinalSample> to_samples(const std::vector<PySample>& subjects) {
    std::vector<LongitudinalSample> out;
    out.reserve(subjects.size());
    for (const PySample& s : subjects) {
        LongitudinalSample sample;
        sample.subject_id = s.first;
        for (const auto& g : s.second) sample.graphs.push_back(to_matrix(g));
        sample.check();
        out.push_back(std::move(sample));
    }
    return out;
}

std::vector<PySample> from_samples(const std::vector<LongitudinalSample>& samples) {
    std::vector<PySample> out;
    out.reserve(samples.size());
    for (const LongitudinalSample& s : samples) {
        PySample p{s.subject_id, {}};
        for (const ConnectivityMatrix& g : s.graphs) p.second.push_back(to_array(g));
        out.push_back(std::move(p));
    }
    return out;
}

py::dict record_to_dict(const LossRecord& r) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["stage"] = r.stage;
    d["d_loss"] = r.d_loss;
    d["g_adv"] = r.g_adv;
    d["g_l1"] = r.g_l1;
    d["g_kl_or_topo"] = r.g_kl_or_topo;
    d["g_total"] = r.g_total;
    return d;
}

TrainConfig make_config(std::size_t timepoints, std::size_t epochs, std::size_t folds,
                        std::size_t hidden, double dropout, double sigma_floor, bool chain_backprop,
                        const std::string& variant, double lambda1, double lambda2, double lambda3,
                        double lr_g, double lr_d, double beta1, double beta2, double weight_decay,
                        std::uint64_t seed) {
    TrainConfig cfg;
    cfg.timepoints = timepoints;
    cfg.epochs = epochs;
    cfg.folds = folds;
    cfg.hidden = hidden;
    cfg.dropout = dropout;
    cfg.sigma_floor = sigma_floor;
    cfg.chain_backprop = chain_backprop;
    cfg.weights.variant = variant_from_name(variant);
    cfg.weights.lambda1 = lambda1;
    cfg.weights.lambda2 = lambda2;
    cfg.weights.lambda3 = lambda3;
    cfg.lr_g = lr_g;
    cfg.lr_d = lr_d;
    cfg.beta1 = beta1;
    cfg.beta2 = beta2;
    cfg.weight_decay = weight_decay;
    cfg.seed = seed;
    return cfg;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Brain connectivity evolution prediction: graph ops, losses, and the GAN cascade";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", PyExc_IOError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.attr("SIGMA_FLOOR") = kSigmaFloor;

    // graph operations
    m.def(
        "symmetrize_clamp",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& raw) {
            ConnectivityMatrix g = to_matrix(raw);
            return to_array(symmetrize_clamp(g.n_r, g.weights));
        },
        py::arg("raw"), "Average with the transpose, zero the diagonal, clamp entries into [0, 1].");
    m.def(
        "node_weight_stats",
        [](const py::array_t<double>& g, double sigma_floor) {
            NodeWeightDistribution d = node_weight_stats(to_matrix(g), sigma_floor);
            return py::make_tuple(py::cast(d.mu), py::cast(d.sigma));
        },
        py::arg("graph"), py::arg("sigma_floor") = kSigmaFloor,
        "Per-node mean and floored standard deviation of the off-diagonal row entries.");
    m.def(
        "node_strength", [](const py::array_t<double>& g) { return node_strength(to_matrix(g)); },
        py::arg("graph"), "Row sums: each node's total connection weight.");
    m.def(
        "validate", [](const py::array_t<double>& g) { to_matrix(g).check(); }, py::arg("graph"),
        "Raise unless the graph is symmetric, zero-diagonal, and within [0, 1].");

    // losses and metrics
    m.def(
        "l1_loss",
        [](const py::array_t<double>& p, const py::array_t<double>& t) {
            return l1_loss(to_matrix(p), to_matrix(t));
        },
        py::arg("predicted"), py::arg("target"));
    m.def(
        "kl_loss",
        [](const py::array_t<double>& p, const py::array_t<double>& t, double sigma_floor) {
            return kl_loss(to_matrix(p), to_matrix(t), sigma_floor);
        },
        py::arg("predicted"), py::arg("target"), py::arg("sigma_floor") = kSigmaFloor,
        "Sum over nodes of the Gaussian divergence between edge-weight distributions.");
    m.def(
        "topology_loss",
        [](const py::array_t<double>& p, const py::array_t<double>& t) {
            return topology_loss(to_matrix(p), to_matrix(t));
        },
        py::arg("predicted"), py::arg("target"),
        "Euclidean distance between node-strength vectors.");
    m.def(
        "mae",
        [](const py::array_t<double>& p, const py::array_t<double>& t) {
            return mae(to_matrix(p), to_matrix(t));
        },
        py::arg("predicted"), py::arg("target"), "Mean absolute error over all entries.");
    m.def("kl_gaussian", &kl_gaussian, py::arg("mu_p"), py::arg("sigma_p"), py::arg("mu_q"),
          py::arg("sigma_q"), py::arg("sigma_floor") = kSigmaFloor,
          "Closed-form KL divergence between two univariate Gaussians.");
    m.def("kl_gaussian_integrated", &kl_gaussian_integrated, py::arg("mu_p"), py::arg("sigma_p"),
          py::arg("mu_q"), py::arg("sigma_q"), py::arg("intervals") = std::size_t(100000),
          "Simpson-rule reference for kl_gaussian.");
    m.def("adversarial_loss_d", &adversarial_loss_d, py::arg("score_real"), py::arg("score_fake"));
    m.def("adversarial_loss_g", &adversarial_loss_g, py::arg("score_fake"));

    // data
    m.def(
        "generate_synthetic",
        [](std::size_t n_subjects, std::size_t n_r, std::size_t timepoints, double drift_scale,
           double noise_scale, double sparsity, std::uint64_t seed) {
            SyntheticConfig cfg;
            cfg.n_subjects = n_subjects;
            cfg.n_r = n_r;
            cfg.timepoints = timepoints;
            cfg.drift_scale = drift_scale;
            cfg.noise_scale = noise_scale;
            cfg.sparsity = sparsity;
            cfg.seed = seed;
            return from_samples(generate_synthetic(cfg));
        },
        py::arg("n_subjects") = 30, py::arg("n_r") = 35, py::arg("timepoints") = 3,
        py::arg("drift_scale") = 0.05, py::arg("noise_scale") = 0.01, py::arg("sparsity") = 0.1,
        py::arg("seed") = 7,
        "Seeded longitudinal dataset: list of (subject_id, [graph at t0, t1, ...]).");
    m.def(
        "load_dataset",
        [](const std::filesystem::path& path) { return from_samples(load_dataset(path)); },
        py::arg("path"), "Read a manifest (or dataset directory) written by save_dataset.");
    m.def(
        "save_dataset",
        [](const std::filesystem::path& dir, const std::vector<PySample>& subjects) {
            return save_dataset(dir, to_samples(subjects));
        },
        py::arg("dir"), py::arg("subjects"), "Write one CSV per graph plus a manifest; returns its path.");
    m.def(
        "kfold_split",
        [](std::size_t n_subjects, std::size_t folds, std::uint64_t seed) {
            std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
            for (FoldSplit& s : kfold_split(n_subjects, folds, seed))
                out.emplace_back(std::move(s.train_ids), std::move(s.test_ids));
            return out;
        },
        py::arg("n_subjects"), py::arg("folds"), py::arg("seed"),
        "Seeded shuffle split: list of (train_ids, test_ids).");

    // training
    py::class_<CascadeTrainer>(m, "Cascade",
                               "Chain of generator/discriminator pairs, one per follow-up "
                               "timepoint. Deterministic given the seed.")
        .def(py::init([](std::size_t n_r, std::size_t timepoints, std::size_t epochs,
                         std::size_t folds, std::size_t hidden, double dropout, double sigma_floor,
                         bool chain_backprop, const std::string& variant, double lambda1,
                         double lambda2, double lambda3, double lr_g, double lr_d, double beta1,
                         double beta2, double weight_decay, std::uint64_t seed) {
                 return std::make_unique<CascadeTrainer>(
                     n_r, make_config(timepoints, epochs, folds, hidden, dropout, sigma_floor,
                                      chain_backprop, variant, lambda1, lambda2, lambda3, lr_g,
                                      lr_d, beta1, beta2, weight_decay, seed));
             }),
             py::arg("n_r"), py::arg("timepoints") = 2, py::arg("epochs") = 500,
             py::arg("folds") = 3, py::arg("hidden") = 0, py::arg("dropout") = 0.3,
             py::arg("sigma_floor") = kSigmaFloor, py::arg("chain_backprop") = true,
             py::arg("variant") = "full", py::arg("lambda1") = 2.0, py::arg("lambda2") = 2.0,
             py::arg("lambda3") = 0.001, py::arg("lr_g") = 0.01, py::arg("lr_d") = 0.0002,
             py::arg("beta1") = 0.5, py::arg("beta2") = 0.999, py::arg("weight_decay") = 0.01,
             py::arg("seed") = 42)
        .def_property_readonly("n_r", &CascadeTrainer::n_r)
        .def_property_readonly("stages", &CascadeTrainer::stages)
        .def(
            "train",
            [](CascadeTrainer& t, const std::vector<PySample>& subjects) {
                py::list out;
                for (const LossRecord& r : t.train(to_samples(subjects))) out.append(record_to_dict(r));
                return out;
            },
            py::arg("subjects"),
            "Run the configured number of epochs; returns one dict per (epoch, stage).")
        .def(
            "predict",
            [](CascadeTrainer& t, const py::array_t<double>& baseline) {
                std::vector<py::array_t<double>> out;
                for (const ConnectivityMatrix& p : t.predict(to_matrix(baseline))) out.push_back(to_array(p));
                return out;
            },
            py::arg("baseline"), "Roll the frozen chain; returns the predictions at t1..tm.")
        .def("save", &CascadeTrainer::save, py::arg("dir"), py::arg("config_hash") = std::string(),
             "Write one checkpoint file per stage into dir.")
        .def(
            "load",
            [](CascadeTrainer& t, const std::filesystem::path& dir) { t.load(dir); },
            py::arg("dir"), "Load the per-stage checkpoints written by save().");

    m.def(
        "evaluate_fold",
        [](CascadeTrainer& t, const std::vector<PySample>& subjects) {
            return evaluate_fold(t, to_samples(subjects));
        },
        py::arg("cascade"), py::arg("subjects"),
        "Mean absolute error per follow-up timepoint over the given subjects.");

    // verification
    m.def(
        "run_gradient_checks",
        [](std::uint64_t seed, double tol, double tol_linear, double step) {
            py::list out;
            for (const ComponentCheck& c : run_gradient_checks(seed, tol, tol_linear, step)) {
                py::dict d;
                d["name"] = c.name;
                d["max_rel_err"] = c.max_rel_err;
                d["tol"] = c.tol;
                d["pass"] = c.pass;
                out.append(d);
            }
            return out;
        },
        py::arg("seed") = 13, py::arg("tol") = 1e-3, py::arg("tol_linear") = 1e-5,
        py::arg("step") = 1e-4,
        "Central-difference check of every differentiable component; list of per-component dicts.");
}
