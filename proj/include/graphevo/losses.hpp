#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "graphevo/graph.hpp"
#include "graphevo/tensor.hpp"

namespace graphevo {

/// Scores are clamped into [kScoreEps, 1-kScoreEps] before any log, so a
/// saturated discriminator cannot produce an infinite loss.
inline constexpr double kScoreEps = 1e-7;

enum class LossVariant { Full, NoKl, NoKlPlusTopology };

const char* variant_name(LossVariant v);
/// Throws ConfigError for unknown names ("full", "no_kl", "no_kl_plus_topology").
LossVariant variant_from_name(const std::string& name);

/// Weighting of the composite objective. lambda3 weights the KL term in the
/// full variant and the topology term in the topology variant; no_kl drops
/// the third term entirely.
struct LossWeights {
    double lambda1 = 2.0;
    double lambda2 = 2.0;
    double lambda3 = 0.001;
    LossVariant variant = LossVariant::Full;

    /// Throws ConfigError when any lambda is negative.
    void check() const;
};

// Plain (scalar) loss values. Each has a tape-recorded counterpart below
// computing the identical value differentiably.

/// -log(score_real) - log(1 - score_fake); what the discriminator minimizes.
double adversarial_loss_d(double score_real, double score_fake);
/// -log(score_fake); the non-saturating generator objective.
double adversarial_loss_g(double score_fake);

/// Sum of absolute differences over all n_r^2 entries.
double l1_loss(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target);

/// Closed-form KL(p||q) between two univariate normals:
///   log(sigma_q/sigma_p) + (sigma_p^2 + (mu_p-mu_q)^2) / (2 sigma_q^2) - 1/2.
/// Throws ContractError when either sigma is below the floor.
double kl_gaussian(double mu_p, double sigma_p, double mu_q, double sigma_q, double sigma_floor = kSigmaFloor);

/// Reference numerical integration of the same divergence (Simpson's rule
/// over mu_p +- 10 sigma_p with compensated summation). Test oracle for the
/// closed form; never used in the training path.
double kl_gaussian_integrated(double mu_p, double sigma_p, double mu_q, double sigma_q,
                              std::size_t intervals = 100000);

/// Sum over nodes of kl_gaussian between per-node edge-weight distributions,
/// p = predicted, q = target.
double kl_loss(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target,
               double sigma_floor = kSigmaFloor);

/// Euclidean distance between node strength vectors.
double topology_loss(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target);

/// Mean absolute difference over all n_r^2 entries.
double mae(const ConnectivityMatrix& predicted, const ConnectivityMatrix& target);

// Tape-recorded variants. `predicted` is the differentiable side; targets
// enter as constants.

ad::Tensor adversarial_loss_d_t(ad::Tape& tape, ad::Tensor score_real, ad::Tensor score_fake);
ad::Tensor adversarial_loss_g_t(ad::Tape& tape, ad::Tensor score_fake);
ad::Tensor l1_loss_t(ad::Tape& tape, ad::Tensor predicted, ad::Tensor target);
ad::Tensor kl_loss_t(ad::Tape& tape, ad::Tensor predicted, const ConnectivityMatrix& target,
                     double sigma_floor = kSigmaFloor);
ad::Tensor topology_loss_t(ad::Tape& tape, ad::Tensor predicted, const ConnectivityMatrix& target);

/// Per-timepoint ingredients of the composite objective: one adversarial
/// value and per-subject l1 and third-term values.
struct StageLossTerms {
    double adv = 0.0;
    std::vector<double> l1;         // one entry per subject
    std::vector<double> kl_or_topo; // one entry per subject; ignored under no_kl
};

/// Composite objective: sum over stages of
///   lambda1 * adv + (lambda2/n_s) * sum(l1) + (lambda3/n_s) * sum(third term).
/// Throws ContractError when a stage's per-subject lists do not have n_s
/// entries.
double full_loss(const std::vector<StageLossTerms>& stages, const LossWeights& weights, std::size_t n_s);

} // namespace graphevo
