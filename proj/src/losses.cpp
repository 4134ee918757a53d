#include "graphevo/losses.hpp"

#include <algorithm>
#include <cmath>

namespace graphevo {

const char* variant_name(LossVariant v) {
    switch (v) {
        case LossVariant::Full: return "full";
        case LossVariant::NoKl: return "no_kl";
        case LossVariant::NoKlPlusTopology: return "no_kl_plus_topology";
    }
    return "?";
}

LossVariant variant_from_name(const std::string& name) {
    if (name == "full") return LossVariant::Full;
    if (name == "no_kl") return LossVariant::NoKl;
    if (name == "no_kl_plus_topology") return LossVariant::NoKlPlusTopology;
    throw ConfigError("unknown loss variant '" + name + "' (expected full, no_kl, or no_kl_plus_topology)");
}

void LossWeights::check() const {
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) {
        throw ConfigError("loss weights must be non-negative");
    }
}

namespace {

double clamp_score(double s) { return std::min(std::max(s, kScoreEps), 1.0 - kScoreEps); }

void check_same_nodes(const ConnectivityMatrix& a, const ConnectivityMatrix& b, const char* what) {
    if (a.n_r != b.n_r) {
        throw DimensionError(std::string(what) + ": node counts differ, " + std::to_string(a.n_r) + " vs " +
                             std::to_string(b.n_r));
    }
}

} // namespace

double adversarial_loss_d(double score_real, double score_fake) {
    return -std::log(clamp_score(score_real)) - std::log(1.0 - clamp_score(score_fake));
}

double adversarial_loss_g(double score_fake) { return -std::log(clamp_score(score_fake)); }

double l1_loss(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target) {
    check_same_nodes(predicted, target, "l1_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.weights.size(); ++i)
        acc += std::fabs(predicted.weights[i] - target.weights[i]);
    return acc;
}

double kl_gaussian(double mu_p, double sigma_p, double mu_q, double sigma_q, double sigma_floor) {
    if (!(sigma_p >= sigma_floor) || !(sigma_q >= sigma_floor)) {
        throw ContractError("kl_gaussian: sigma below the floor (apply the floor upstream)");
    }
    double dmu = mu_p - mu_q;
    return std::log(sigma_q / sigma_p) + (sigma_p * sigma_p + dmu * dmu) / (2.0 * sigma_q * sigma_q) - 0.5;
}

double kl_gaussian_integrated(double mu_p, double sigma_p, double mu_q, double sigma_q, std::size_t intervals) {
    if (intervals < 2 || intervals % 2 != 0) throw ContractError("kl_gaussian_integrated: need an even interval count");
    // substitute x = mu_p + sigma_p t, so p(x) dx = phi(t) dt over t in [-10, 10]
    const double pi = std::acos(-1.0);
    const double log_2pi = std::log(2.0 * pi);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * pi);
    auto integrand = [&](double t) {
        double x = mu_p + sigma_p * t;
        double log_p = -0.5 * t * t - 0.5 * log_2pi - std::log(sigma_p);
        double zq = (x - mu_q) / sigma_q;
        double log_q = -0.5 * zq * zq - 0.5 * log_2pi - std::log(sigma_q);
        double phi = std::exp(-0.5 * t * t) * inv_sqrt_2pi;
        return phi * (log_p - log_q);
    };
    const double a = -10.0, b = 10.0;
    const double h = (b - a) / static_cast<double>(intervals);
    // Kahan summation: the tail cases (tiny sigma_q) integrate to ~1e4 and
    // naive accumulation over 1e5 terms would cost the 1e-6 agreement budget
    double sum = integrand(a) + integrand(b);
    double comp = 0.0;
    auto add = [&](double term) {
        double y = term - comp;
        double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    };
    for (std::size_t i = 1; i < intervals; ++i) {
        double coef = (i % 2 == 1) ? 4.0 : 2.0;
        add(coef * integrand(a + h * static_cast<double>(i)));
    }
    return sum * h / 3.0;
}

double kl_loss(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target, double sigma_floor) {
    check_same_nodes(predicted, target, "kl_loss");
    NodeWeightDistribution p = node_weight_stats(predicted, sigma_floor);
    NodeWeightDistribution q = node_weight_stats(target, sigma_floor);
    double acc = 0.0;
    for (std::size_t k = 0; k < predicted.n_r; ++k)
        acc += kl_gaussian(p.mu[k], p.sigma[k], q.mu[k], q.sigma[k], sigma_floor);
    return acc;
}

double topology_loss(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target) {
    check_same_nodes(predicted, target, "topology_loss");
    std::vector<double> sp = node_strength(predicted);
    std::vector<double> sq = node_strength(target);
    double acc = 0.0;
    for (std::size_t k = 0; k < sp.size(); ++k) {
        double d = sp[k] - sq[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double mae(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target) {
    check_same_nodes(predicted, target, "mae");
    return l1_loss(predicted, target) / static_cast<double>(predicted.n_r * predicted.n_r);
}

// ---------------------------------------------------------------------------
// Tape-recorded variants
// ---------------------------------------------------------------------------

namespace {

ad::Tensor clamp_score_t(ad::Tape& tape, ad::Tensor score) {
    if (score.size() != 1) throw ContractError("adversarial loss: score must be scalar");
    return tape.clamp(score, kScoreEps, 1.0 - kScoreEps);
}

void check_square_pair(ad::Tensor predicted, const ad::Shape& target_shape, const char* what) {
    const ad::Shape& ps = predicted.shape();
    if (ps.size() != 2 || ps[0] != ps[1]) {
        throw DimensionError(std::string(what) + ": predicted graph must be square, got " + ad::shape_str(ps));
    }
    if (ps != target_shape) {
        throw DimensionError(std::string(what) + ": predicted " + ad::shape_str(ps) + " vs target " +
                             ad::shape_str(target_shape));
    }
}

} // namespace

ad::Tensor adversarial_loss_d_t(ad::Tape& tape, ad::Tensor score_real, ad::Tensor score_fake) {
    ad::Tensor one = tape.scalar_constant(1.0);
    ad::Tensor real_term = tape.log(clamp_score_t(tape, score_real));
    ad::Tensor fake_term = tape.log(tape.sub(one, clamp_score_t(tape, score_fake)));
    return tape.scalar_mul(tape.add(real_term, fake_term), -1.0);
}

ad::Tensor adversarial_loss_g_t(ad::Tape& tape, ad::Tensor score_fake) {
    return tape.scalar_mul(tape.log(clamp_score_t(tape, score_fake)), -1.0);
}

ad::Tensor l1_loss_t(ad::Tape& tape, ad::Tensor predicted, ad::Tensor target) {
    if (predicted.shape() != target.shape()) {
        throw DimensionError("l1_loss: shapes differ, " + ad::shape_str(predicted.shape()) + " vs " +
                             ad::shape_str(target.shape()));
    }
    return tape.sum(tape.abs(tape.sub(predicted, target)));
}

ad::Tensor kl_loss_t(ad::Tape& tape, ad::Tensor predicted, const ConnectivityMatrix& target, double sigma_floor) {
    check_square_pair(predicted, {target.n_r, target.n_r}, "kl_loss");
    NodeStatsT p = node_weight_stats_t(tape, predicted, sigma_floor);
    NodeWeightDistribution q = node_weight_stats(target, sigma_floor);
    std::size_t n = target.n_r;
    ad::Tensor mu_q = tape.constant({n, 1}, q.mu);
    ad::Tensor sigma_q = tape.constant({n, 1}, q.sigma);

    ad::Tensor log_term = tape.sub(tape.log(sigma_q), tape.log(p.sigma));
    ad::Tensor dmu = tape.sub(p.mu, mu_q);
    ad::Tensor numer = tape.add(tape.mul(p.sigma, p.sigma), tape.mul(dmu, dmu));
    ad::Tensor denom = tape.scalar_mul(tape.mul(sigma_q, sigma_q), 2.0);
    ad::Tensor per_node = tape.sub(tape.add(log_term, tape.div(numer, denom)), tape.scalar_constant(0.5));
    return tape.sum(per_node);
}

ad::Tensor topology_loss_t(ad::Tape& tape, ad::Tensor predicted, const ConnectivityMatrix& target) {
    check_square_pair(predicted, {target.n_r, target.n_r}, "topology_loss");
    ad::Tensor sp = node_strength_t(tape, predicted);
    ad::Tensor sq = tape.constant({target.n_r, 1}, node_strength(target));
    ad::Tensor diff = tape.sub(sp, sq);
    return tape.sqrt(tape.sum(tape.mul(diff, diff)));
}

double full_loss(const std::vector<StageLossTerms>& stages, const LossWeights& weights, std::size_t n_s) {
    weights.check();
    if (n_s == 0) throw ContractError("full_loss: subject count must be positive");
    double total = 0.0;
    for (const StageLossTerms& stage : stages) {
        if (stage.l1.size() != n_s) {
            throw ContractError("full_loss: stage has " + std::to_string(stage.l1.size()) + " l1 terms for " +
                                std::to_string(n_s) + " subjects");
        }
        if (weights.variant != LossVariant::NoKl && stage.kl_or_topo.size() != n_s) {
            throw ContractError("full_loss: stage has " + std::to_string(stage.kl_or_topo.size()) +
                                " third-term values for " + std::to_string(n_s) + " subjects");
        }
        double l1_sum = 0.0;
        for (double v : stage.l1) l1_sum += v;
        total += weights.lambda1 * stage.adv + (weights.lambda2 / static_cast<double>(n_s)) * l1_sum;
        if (weights.variant != LossVariant::NoKl) {
            double third_sum = 0.0;
            for (double v : stage.kl_or_topo) third_sum += v;
            total += (weights.lambda3 / static_cast<double>(n_s)) * third_sum;
        }
    }
    return total;
}

} // namespace graphevo
