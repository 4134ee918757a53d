#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "graphevo/errors.hpp"
#include "graphevo/tensor.hpp"

namespace graphevo {

/// Default floor for per-node edge-weight standard deviations. Keeps the
/// Gaussian KL defined on constant rows.
inline constexpr double kSigmaFloor = 1e-6;

/// Weighted undirected graph over n_r regions. Valid instances are
/// symmetric, zero-diagonal, with entries in [0,1].
struct ConnectivityMatrix {
    std::size_t n_r = 0;
    std::vector<double> weights; // row-major n_r x n_r

    ConnectivityMatrix() = default;
    ConnectivityMatrix(std::size_t n, std::vector<double> w);
    static ConnectivityMatrix zeros(std::size_t n);

    double at(std::size_t i, std::size_t j) const { return weights[i * n_r + j]; }
    double& at(std::size_t i, std::size_t j) { return weights[i * n_r + j]; }

    /// Throws DomainError when symmetry, zero diagonal, or [0,1] range is violated.
    void check() const;
};

/// One subject's graphs at timepoints t_0 ... t_m, all sharing n_r.
struct LongitudinalSample {
    std::string subject_id;
    std::vector<ConnectivityMatrix> graphs;

    std::size_t timepoints() const { return graphs.size(); }
    /// Throws DataError (naming the subject) when fewer than 2 timepoints
    /// or mixed n_r are present.
    void check() const;
};

/// Per-node Gaussian fit of connected edge weights.
struct NodeWeightDistribution {
    std::vector<double> mu;
    std::vector<double> sigma; // floored, all entries >= sigma_floor
};

/// mu[k] = mean of the n_r-1 off-diagonal entries of row k; sigma[k] =
/// population standard deviation of the same entries, floored at sigma_floor.
NodeWeightDistribution node_weight_stats(const ConnectivityMatrix& g, double sigma_floor = kSigmaFloor);

/// strength[k] = sum of row k (each incident edge counted once per endpoint row).
std::vector<double> node_strength(const ConnectivityMatrix& g);

/// (raw + raw^T)/2, diagonal zeroed, entries clamped to [0,1].
ConnectivityMatrix symmetrize_clamp(std::size_t n, const std::vector<double>& raw);

// Tape-recorded variants of the three operations above, for use inside
// differentiable losses and network heads. Value-identical to the plain
// versions on valid inputs.

struct NodeStatsT {
    ad::Tensor mu;    // n x 1
    ad::Tensor sigma; // n x 1
};

/// adjacency: n x n tensor assumed symmetric with zero diagonal (the plain
/// invariants). Gradient flows into adjacency; the sigma floor kills the
/// gradient only where the variance is floored.
NodeStatsT node_weight_stats_t(ad::Tape& tape, ad::Tensor adjacency, double sigma_floor = kSigmaFloor);

ad::Tensor node_strength_t(ad::Tape& tape, ad::Tensor adjacency);

/// Differentiable except at the clamp boundaries (subgradient 0 outside).
ad::Tensor symmetrize_clamp_t(ad::Tape& tape, ad::Tensor raw);

/// Reads the current value of a tape node as a ConnectivityMatrix.
/// The caller asserts the node already satisfies the invariants
/// (i.e. it is the output of symmetrize_clamp_t).
ConnectivityMatrix to_connectivity(ad::Tensor t);

} // namespace graphevo
