#include "graphevo/verification.hpp"

#include <cstddef>
#include <utility>
#include <vector>

#include "graphevo/gnn.hpp"
#include "graphevo/graph.hpp"
#include "graphevo/losses.hpp"
#include "graphevo/rng.hpp"
#include "graphevo/tensor.hpp"

namespace graphevo {

namespace {

// Edge weights are kept well inside (0, 1): entries near 0 would let a
// finite-difference step flip neighborhood membership in the convolution,
// and entries near the clamp boundaries would sit on a subgradient kink.
ConnectivityMatrix random_graph(Rng& rng, std::size_t n, double lo = 0.15, double hi = 0.85) {
    ConnectivityMatrix g = ConnectivityMatrix::zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double w = rng.uniform(lo, hi);
            g.at(i, j) = w;
            g.at(j, i) = w;
        }
    }
    return g;
}

ad::Variable graph_leaf(const ConnectivityMatrix& g) {
    return ad::Variable(ad::Shape{g.n_r, g.n_r}, g.weights);
}

// For checks whose objective involves per-row Gaussian stats: a near-constant
// row makes sigma tiny and the divergence so stiff that an h=1e-4 central
// difference no longer resolves the (correct) analytic slope. Redraw until
// every row has a healthy spread.
ConnectivityMatrix spread_graph(Rng& rng, std::size_t n) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        ConnectivityMatrix g = random_graph(rng, n);
        NodeWeightDistribution stats = node_weight_stats(g);
        bool ok = true;
        for (double s : stats.sigma) ok = ok && s >= 0.05;
        if (ok) return g;
    }
    throw ContractError("spread_graph: could not draw a well-spread graph");
}

// Off-diagonal entries shifted by +-delta (symmetrically, staying in range);
// the diagonal is left at zero on both sides, where |pred - target| = 0 is an
// exact zero of abs and both gradient estimates vanish.
ConnectivityMatrix shifted_target(const ConnectivityMatrix& g, double delta) {
    ConnectivityMatrix t = g;
    for (std::size_t i = 0; i < g.n_r; ++i) {
        for (std::size_t j = 0; j < g.n_r; ++j) {
            if (i == j) continue;
            double w = g.at(i, j);
            t.at(i, j) = (w + delta <= 1.0) ? w + delta : w - delta;
        }
    }
    return t;
}

ad::Tensor squared_error(ad::Tape& tape, ad::Tensor a, ad::Tensor b) {
    ad::Tensor d = tape.sub(a, b);
    return tape.sum(tape.mul(d, d));
}

ComponentCheck from_report(std::string name, const ad::GradCheckReport& report) {
    return ComponentCheck{std::move(name), report.max_rel_err, report.tol, report.pass};
}

ComponentCheck check_ecc_layer(Rng& rng, double tol, double step) {
    const std::size_t n = 5, d_in = 3, d_out = 4;
    EccLayer layer(d_in, d_out);
    layer.init(rng);
    ad::Variable adjacency = graph_leaf(random_graph(rng, n));
    std::vector<double> feat(n * d_in);
    for (double& v : feat) v = rng.uniform(-1.0, 1.0);
    ad::Variable features(ad::Shape{n, d_in}, feat);

    std::vector<ad::NamedVariable> vars{{"adjacency", &adjacency}, {"features", &features},
                                        {"filter_weight", &layer.filter_weight},
                                        {"filter_bias", &layer.filter_bias},
                                        {"bias", &layer.bias}};
    auto build = [&](ad::Tape& tape) {
        ad::Tensor out = ecc_forward(tape, layer, tape.leaf(adjacency), tape.leaf(features));
        return tape.sum(tape.mul(out, out));
    };
    return from_report("ecc_layer", ad::grad_check(build, vars, step, tol));
}

ComponentCheck check_generator(Rng& rng, double tol, double step) {
    const std::size_t n = 6;
    Generator g(n, n, 0.0);
    g.init(rng);
    ad::Variable input = graph_leaf(random_graph(rng, n));
    ConnectivityMatrix target = random_graph(rng, n);

    std::vector<ad::NamedVariable> vars = g.named_parameters("g");
    vars.push_back({"input", &input});
    auto build = [&](ad::Tape& tape) {
        ad::Tensor out = g.forward(tape, tape.leaf(input), true);
        return squared_error(tape, out, tape.constant(ad::Shape{n, n}, target.weights));
    };
    return from_report("generator", ad::grad_check(build, vars, step, tol));
}

ComponentCheck check_discriminator(Rng& rng, double tol, double step) {
    const std::size_t n = 6;
    Discriminator d(n, n);
    d.init(rng);
    ad::Variable judged = graph_leaf(random_graph(rng, n));
    ad::Variable cond = graph_leaf(random_graph(rng, n));

    std::vector<ad::NamedVariable> vars = d.named_parameters("d");
    vars.push_back({"judged", &judged});
    vars.push_back({"cond", &cond});
    auto build = [&](ad::Tape& tape) {
        return d.forward(tape, tape.leaf(judged), tape.leaf(cond));
    };
    return from_report("discriminator", ad::grad_check(build, vars, step, tol));
}

ComponentCheck check_l1(Rng& rng, double tol, double step) {
    const std::size_t n = 4;
    ConnectivityMatrix pred = random_graph(rng, n);
    ConnectivityMatrix target = shifted_target(pred, 0.07);
    ad::Variable predicted = graph_leaf(pred);

    std::vector<ad::NamedVariable> vars{{"predicted", &predicted}};
    auto build = [&](ad::Tape& tape) {
        return l1_loss_t(tape, tape.leaf(predicted), tape.constant(ad::Shape{n, n}, target.weights));
    };
    return from_report("loss_l1", ad::grad_check(build, vars, step, tol));
}

ComponentCheck check_kl(Rng& rng, double tol, double step) {
    const std::size_t n = 5;
    ad::Variable predicted = graph_leaf(spread_graph(rng, n));
    ConnectivityMatrix target = spread_graph(rng, n);

    std::vector<ad::NamedVariable> vars{{"predicted", &predicted}};
    auto build = [&](ad::Tape& tape) { return kl_loss_t(tape, tape.leaf(predicted), target); };
    return from_report("loss_kl", ad::grad_check(build, vars, step, tol));
}

ComponentCheck check_topology(Rng& rng, double tol, double step) {
    const std::size_t n = 5;
    ad::Variable predicted = graph_leaf(random_graph(rng, n));
    ConnectivityMatrix target = random_graph(rng, n);

    std::vector<ad::NamedVariable> vars{{"predicted", &predicted}};
    auto build = [&](ad::Tape& tape) { return topology_loss_t(tape, tape.leaf(predicted), target); };
    return from_report("loss_topology", ad::grad_check(build, vars, step, tol));
}

ComponentCheck check_adversarial(Rng& rng, double tol, double step) {
    ad::Variable z_real(ad::Shape{1, 1}, {rng.uniform(-0.5, 0.5)});
    ad::Variable z_fake(ad::Shape{1, 1}, {rng.uniform(-0.5, 0.5)});

    std::vector<ad::NamedVariable> vars{{"z_real", &z_real}, {"z_fake", &z_fake}};
    auto build = [&](ad::Tape& tape) {
        ad::Tensor real = tape.sigmoid(tape.leaf(z_real));
        ad::Tensor fake = tape.sigmoid(tape.leaf(z_fake));
        return tape.add(adversarial_loss_d_t(tape, real, fake), adversarial_loss_g_t(tape, fake));
    };
    return from_report("loss_adversarial", ad::grad_check(build, vars, step, tol));
}

// Composite wiring for one timepoint and one subject: adversarial + l1 + KL
// with the default weights, gradients taken through the prediction and the
// discriminator at once.
ComponentCheck check_full(Rng& rng, double tol, double step) {
    const std::size_t n = 4;
    Discriminator d(n, n);
    d.init(rng);
    ConnectivityMatrix pred = spread_graph(rng, n);
    ConnectivityMatrix target = shifted_target(pred, 0.07);
    ad::Variable predicted = graph_leaf(pred);
    LossWeights weights;

    std::vector<ad::NamedVariable> vars = d.named_parameters("d");
    vars.push_back({"predicted", &predicted});
    auto build = [&](ad::Tape& tape) {
        ad::Tensor x = tape.leaf(predicted);
        ad::Tensor cond = tape.constant(ad::Shape{n, n}, target.weights);
        ad::Tensor adv = adversarial_loss_g_t(tape, d.forward(tape, x, cond));
        ad::Tensor l1 = l1_loss_t(tape, x, cond);
        ad::Tensor kl = kl_loss_t(tape, x, target);
        return tape.add(tape.add(tape.scalar_mul(adv, weights.lambda1), tape.scalar_mul(l1, weights.lambda2)),
                        tape.scalar_mul(kl, weights.lambda3));
    };
    return from_report("loss_full", ad::grad_check(build, vars, step, tol));
}

} // namespace

std::vector<ComponentCheck> run_gradient_checks(std::uint64_t seed, double tol, double tol_linear,
                                                double step) {
    Rng rng(seed);
    std::vector<ComponentCheck> checks;
    checks.push_back(check_ecc_layer(rng, tol, step));
    checks.push_back(check_generator(rng, tol, step));
    checks.push_back(check_discriminator(rng, tol, step));
    checks.push_back(check_l1(rng, tol_linear, step));
    checks.push_back(check_kl(rng, tol, step));
    checks.push_back(check_topology(rng, tol, step));
    checks.push_back(check_adversarial(rng, tol, step));
    checks.push_back(check_full(rng, tol, step));
    return checks;
}

bool all_pass(const std::vector<ComponentCheck>& checks) {
    for (const ComponentCheck& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

} // namespace graphevo
