#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "graphevo/losses.hpp"
#include "graphevo/rng.hpp"

#include <cmath>

using namespace graphevo;

namespace {

ConnectivityMatrix uniform_graph(std::size_t n, double w) {
    ConnectivityMatrix g = ConnectivityMatrix::zeros(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) g.at(i, j) = w;
    return g;
}

ConnectivityMatrix random_graph(std::size_t n, Rng& rng) {
    ConnectivityMatrix g = ConnectivityMatrix::zeros(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) g.at(i, j) = g.at(j, i) = rng.uniform();
    return g;
}

} // namespace

TEST_CASE("adversarial losses at reference points") {
    CHECK(adversarial_loss_d(0.5, 0.5) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(adversarial_loss_d(1.0 - kScoreEps, kScoreEps) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(adversarial_loss_d(0.8, 0.3) ==
          doctest::Approx(-std::log(0.8) - std::log(0.7)).epsilon(1e-15));
    CHECK(adversarial_loss_d(0.8, 0.3) == doctest::Approx(0.5798).epsilon(1e-4));

    CHECK(adversarial_loss_g(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(adversarial_loss_g(1.0 - kScoreEps) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(adversarial_loss_g(0.25) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

    // clamping keeps saturated scores finite
    CHECK(std::isfinite(adversarial_loss_d(0.0, 1.0)));
    CHECK(std::isfinite(adversarial_loss_g(0.0)));
    CHECK(adversarial_loss_d(0.0, 1.0) > 0.0);
}

TEST_CASE("l1 loss hand cases") {
    Rng rng(3);
    ConnectivityMatrix g = random_graph(4, rng);
    CHECK(l1_loss(g, g) == 0.0);

    CHECK(l1_loss(uniform_graph(2, 0.2), uniform_graph(2, 0.5)) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(l1_loss(ConnectivityMatrix::zeros(3), uniform_graph(3, 1.0)) == 6.0);

    CHECK_THROWS_AS(l1_loss(g, uniform_graph(3, 0.1)), DimensionError);
}

TEST_CASE("gaussian KL closed form against the integration oracle") {
    // oracle self-check at analytic points first
    CHECK(kl_gaussian_integrated(0, 1, 0, 1) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(kl_gaussian_integrated(1, 1, 0, 1) == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(kl_gaussian_integrated(0, 2, 0, 1) ==
          doctest::Approx(std::log(0.5) + 2.0 - 0.5).epsilon(1e-8));

    CHECK(kl_gaussian(0, 1, 0, 1) == 0.0);
    CHECK(kl_gaussian(1, 1, 0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(kl_gaussian(0, 2, 0, 1) == doctest::Approx(std::log(0.5) + 1.5).epsilon(1e-15));

    Rng rng(1234);
    for (int trial = 0; trial < 100; ++trial) {
        CAPTURE(trial);
        double mu_p = rng.uniform(-1.0, 1.0);
        double mu_q = rng.uniform(-1.0, 1.0);
        double sigma_p = rng.uniform(0.01, 2.0);
        double sigma_q = rng.uniform(0.01, 2.0);
        double closed = kl_gaussian(mu_p, sigma_p, mu_q, sigma_q);
        double integrated = kl_gaussian_integrated(mu_p, sigma_p, mu_q, sigma_q);
        CHECK(std::fabs(closed - integrated) < 1e-6);
    }
}

TEST_CASE("kl_gaussian rejects sigmas below the floor") {
    CHECK_THROWS_AS(kl_gaussian(0, 1e-9, 0, 1), ContractError);
    CHECK_THROWS_AS(kl_gaussian(0, 1, 0, 0), ContractError);
}

TEST_CASE("kl_loss composition and invariances") {
    Rng rng(7);
    ConnectivityMatrix g = random_graph(5, rng);
    CHECK(kl_loss(g, g) == 0.0);

    ConnectivityMatrix p = uniform_graph(3, 0.5);
    ConnectivityMatrix q = uniform_graph(3, 0.3);
    double expected = 3.0 * kl_gaussian(0.5, kSigmaFloor, 0.3, kSigmaFloor);
    CHECK(kl_loss(p, q) == doctest::Approx(expected).epsilon(1e-12));

    // identical node relabeling leaves the value unchanged
    ConnectivityMatrix a = random_graph(4, rng);
    ConnectivityMatrix b = random_graph(4, rng);
    std::vector<std::size_t> perm = {2, 0, 3, 1};
    ConnectivityMatrix pa = ConnectivityMatrix::zeros(4), pb = ConnectivityMatrix::zeros(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            pa.at(perm[i], perm[j]) = a.at(i, j);
            pb.at(perm[i], perm[j]) = b.at(i, j);
        }
    CHECK(kl_loss(pa, pb) == doctest::Approx(kl_loss(a, b)).epsilon(1e-12));
}

TEST_CASE("topology loss hand cases") {
    Rng rng(9);
    ConnectivityMatrix g = random_graph(4, rng);
    CHECK(topology_loss(g, g) == 0.0);

    // strengths [0.2,0.2] vs [0.5,0.5]
    CHECK(topology_loss(uniform_graph(2, 0.2), uniform_graph(2, 0.5)) ==
          doctest::Approx(std::sqrt(2.0 * 0.09)).epsilon(1e-12));

    ConnectivityMatrix a = random_graph(4, rng);
    ConnectivityMatrix b = random_graph(4, rng);
    std::vector<std::size_t> perm = {3, 1, 0, 2};
    ConnectivityMatrix pa = ConnectivityMatrix::zeros(4), pb = ConnectivityMatrix::zeros(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            pa.at(perm[i], perm[j]) = a.at(i, j);
            pb.at(perm[i], perm[j]) = b.at(i, j);
        }
    CHECK(topology_loss(pa, pb) == doctest::Approx(topology_loss(a, b)).epsilon(1e-12));
}

TEST_CASE("mae hand cases") {
    ConnectivityMatrix a = uniform_graph(2, 0.2);
    ConnectivityMatrix b = uniform_graph(2, 0.5);
    CHECK(mae(a, a) == 0.0);
    CHECK(mae(a, b) == doctest::Approx(0.15).epsilon(1e-15));
    CHECK(mae(a, b) == mae(b, a));
}

TEST_CASE("full loss composition") {
    LossWeights w; // defaults (2, 2, 0.001), full
    CHECK(full_loss({{0.0, {0, 0}, {0, 0}}}, w, 2) == 0.0);

    std::vector<StageLossTerms> stages = {{1.0, {0.6, 0.6}, {0.0, 0.0}}};
    CHECK(full_loss(stages, w, 2) == 3.2);

    // doubling lambda2 doubles only the l1 contribution
    LossWeights w2 = w;
    w2.lambda2 = 4.0;
    double base = full_loss(stages, w, 2);
    double doubled = full_loss(stages, w2, 2);
    CHECK(doubled - base == doctest::Approx(1.2).epsilon(1e-15));

    // variant handling
    std::vector<StageLossTerms> with_third = {{1.0, {0.6, 0.6}, {10.0, 10.0}}};
    LossWeights no_kl = w;
    no_kl.variant = LossVariant::NoKl;
    CHECK(full_loss(with_third, no_kl, 2) == full_loss(stages, no_kl, 2));
    LossWeights topo = w;
    topo.variant = LossVariant::NoKlPlusTopology;
    CHECK(full_loss(with_third, topo, 2) ==
          doctest::Approx(3.2 + 0.001 * 10.0).epsilon(1e-12));

    // inconsistent subject counts
    CHECK_THROWS_AS(full_loss({{1.0, {0.6}, {0.0, 0.0}}}, w, 2), ContractError);
    CHECK_THROWS_AS(full_loss({{1.0, {0.6, 0.6}, {0.0}}}, w, 2), ContractError);
}

TEST_CASE("loss outputs are finite and non-negative on random graphs") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        ConnectivityMatrix a = random_graph(6, rng);
        ConnectivityMatrix b = random_graph(6, rng);
        for (double v : {l1_loss(a, b), kl_loss(a, b), topology_loss(a, b), mae(a, b),
                         adversarial_loss_d(rng.uniform(), rng.uniform()), adversarial_loss_g(rng.uniform())}) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("tape losses match plain values and pass gradcheck") {
    Rng rng(77);
    ConnectivityMatrix target = random_graph(5, rng);
    ConnectivityMatrix pred = random_graph(5, rng);
    // keep |pred - target| away from the abs kink for the l1 check
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) {
            if (std::fabs(pred.at(i, j) - target.at(i, j)) < 0.05) {
                double v = std::min(1.0, target.at(i, j) + 0.1);
                pred.at(i, j) = pred.at(j, i) = v == target.at(i, j) ? v - 0.1 : v;
            }
        }

    ad::Variable pvar({5, 5}, pred.weights);

    SUBCASE("values agree with the plain implementations") {
        ad::Tape tape;
        ad::Tensor p = tape.leaf(pvar);
        ad::Tensor t = tape.constant({5, 5}, target.weights);
        CHECK(l1_loss_t(tape, p, t).scalar() == l1_loss(pred, target));
        CHECK(kl_loss_t(tape, p, target).scalar() == doctest::Approx(kl_loss(pred, target)).epsilon(1e-12));
        CHECK(topology_loss_t(tape, p, target).scalar() ==
              doctest::Approx(topology_loss(pred, target)).epsilon(1e-12));

        ad::Tensor real = tape.scalar_constant(0.8);
        ad::Tensor fake = tape.scalar_constant(0.3);
        CHECK(adversarial_loss_d_t(tape, real, fake).scalar() == adversarial_loss_d(0.8, 0.3));
        CHECK(adversarial_loss_g_t(tape, fake).scalar() == adversarial_loss_g(0.3));
    }

    SUBCASE("gradients match central differences") {
        auto check_loss = [&](const char* name, auto make, double tol) {
            CAPTURE(name);
            auto build = [&](ad::Tape& t) { return make(t, t.leaf(pvar)); };
            ad::GradCheckReport r = ad::grad_check(build, {{"predicted", &pvar}}, 1e-5, tol);
            CHECK(r.pass);
        };
        check_loss(
            "l1", [&](ad::Tape& t, ad::Tensor p) { return l1_loss_t(t, p, t.constant({5, 5}, target.weights)); },
            1e-5);
        check_loss("kl", [&](ad::Tape& t, ad::Tensor p) { return kl_loss_t(t, p, target); }, 1e-3);
        check_loss("topology", [&](ad::Tape& t, ad::Tensor p) { return topology_loss_t(t, p, target); }, 1e-3);
    }

    SUBCASE("adversarial gradient through a sigmoid score") {
        ad::Variable logit({1}, {0.4});
        auto build = [&](ad::Tape& t) {
            ad::Tensor fake = t.sigmoid(t.leaf(logit));
            ad::Tensor real = t.scalar_constant(0.9);
            return t.add(adversarial_loss_d_t(t, real, fake), adversarial_loss_g_t(t, fake));
        };
        ad::GradCheckReport r = ad::grad_check(build, {{"logit", &logit}}, 1e-5, 1e-6);
        CHECK(r.pass);
    }
}

TEST_CASE("variant names round-trip") {
    for (LossVariant v : {LossVariant::Full, LossVariant::NoKl, LossVariant::NoKlPlusTopology}) {
        CHECK(variant_from_name(variant_name(v)) == v);
    }
    CHECK_THROWS_AS(variant_from_name("bogus"), ConfigError);
    LossWeights w;
    w.lambda3 = -1.0;
    CHECK_THROWS_AS(w.check(), ConfigError);
}
