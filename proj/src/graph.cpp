#include "graphevo/graph.hpp"

#include <algorithm>
#include <cmath>

namespace graphevo {

ConnectivityMatrix::ConnectivityMatrix(std::size_t n, std::vector<double> w) : n_r(n), weights(std::move(w)) {
    if (weights.size() != n_r * n_r) {
        throw DimensionError("ConnectivityMatrix: " + std::to_string(n_r) + " nodes need " +
                             std::to_string(n_r * n_r) + " weights, got " + std::to_string(weights.size()));
    }
}

ConnectivityMatrix ConnectivityMatrix::zeros(std::size_t n) {
    return ConnectivityMatrix(n, std::vector<double>(n * n, 0.0));
}

void ConnectivityMatrix::check() const {
    for (std::size_t i = 0; i < n_r; ++i) {
        if (at(i, i) != 0.0) {
            throw DomainError("ConnectivityMatrix: nonzero diagonal at (" + std::to_string(i) + "," +
                              std::to_string(i) + ")");
        }
        for (std::size_t j = 0; j < n_r; ++j) {
            double w = at(i, j);
            if (!(w >= 0.0 && w <= 1.0)) {
                throw DomainError("ConnectivityMatrix: entry (" + std::to_string(i) + "," + std::to_string(j) +
                                  ") = " + std::to_string(w) + " outside [0,1]");
            }
            if (w != at(j, i)) {
                throw DomainError("ConnectivityMatrix: asymmetry at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
            }
        }
    }
}

void LongitudinalSample::check() const {
    if (graphs.size() < 2) {
        throw DataError("subject " + subject_id + ": needs at least 2 timepoints, has " +
                        std::to_string(graphs.size()));
    }
    for (const auto& g : graphs) {
        if (g.n_r != graphs.front().n_r) {
            throw DataError("subject " + subject_id + ": mixed node counts across timepoints");
        }
    }
}

namespace {

// Same accumulation order as the tape path (full row sweep; the zero diagonal
// contributes exactly nothing), so plain and recorded stats agree bitwise.
void row_moments(const ConnectivityMatrix& g, std::size_t k, double& mean, double& mean_sq) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < g.n_r; ++j) {
        double w = g.at(k, j);
        s += w;
        s2 += w * w;
    }
    double denom = static_cast<double>(g.n_r - 1);
    mean = s / denom;
    mean_sq = s2 / denom;
}

} // namespace

NodeWeightDistribution node_weight_stats(const ConnectivityMatrix& g, double sigma_floor) {
    if (g.n_r < 2) throw DomainError("node_weight_stats: degenerate graph with fewer than 2 nodes");
    NodeWeightDistribution d;
    d.mu.resize(g.n_r);
    d.sigma.resize(g.n_r);
    double floor_sq = sigma_floor * sigma_floor;
    for (std::size_t k = 0; k < g.n_r; ++k) {
        double mean, mean_sq;
        row_moments(g, k, mean, mean_sq);
        d.mu[k] = mean;
        // population variance; clamped before the root against fp cancellation
        double var = mean_sq - mean * mean;
        d.sigma[k] = std::sqrt(std::max(var, floor_sq));
    }
    return d;
}

std::vector<double> node_strength(const ConnectivityMatrix& g) {
    std::vector<double> s(g.n_r, 0.0);
    for (std::size_t k = 0; k < g.n_r; ++k)
        for (std::size_t j = 0; j < g.n_r; ++j) s[k] += g.at(k, j);
    return s;
}

ConnectivityMatrix symmetrize_clamp(std::size_t n, const std::vector<double>& raw) {
    if (raw.size() != n * n) {
        throw DimensionError("symmetrize_clamp: expected a square " + std::to_string(n) + "x" + std::to_string(n) +
                             " matrix, got " + std::to_string(raw.size()) + " values");
    }
    ConnectivityMatrix out = ConnectivityMatrix::zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double v = (raw[i * n + j] + raw[j * n + i]) * 0.5;
            double c = std::min(std::max(v, 0.0), 1.0);
            out.at(i, j) = (c == 0.0) ? 0.0 : c; // canonicalize -0.0
        }
    }
    return out;
}

namespace {

std::size_t square_dim(const ad::Shape& s, const char* what) {
    if (s.size() != 2 || s[0] != s[1]) {
        throw DimensionError(std::string(what) + ": expected a square matrix, got " + ad::shape_str(s));
    }
    return s[0];
}

ad::Tensor ones_column(ad::Tape& tape, std::size_t n) {
    return tape.constant({n, 1}, std::vector<double>(n, 1.0));
}

} // namespace

NodeStatsT node_weight_stats_t(ad::Tape& tape, ad::Tensor adjacency, double sigma_floor) {
    std::size_t n = square_dim(adjacency.shape(), "node_weight_stats");
    if (n < 2) throw DomainError("node_weight_stats: degenerate graph with fewer than 2 nodes");
    ad::Tensor ones = ones_column(tape, n);
    // divide (not multiply by reciprocal): keeps values bitwise equal to the
    // plain node_weight_stats
    ad::Tensor denom = tape.scalar_constant(static_cast<double>(n - 1));
    ad::Tensor mu = tape.div(tape.matmul(adjacency, ones), denom);
    ad::Tensor mean_sq = tape.div(tape.matmul(tape.mul(adjacency, adjacency), ones), denom);
    ad::Tensor var = tape.sub(mean_sq, tape.mul(mu, mu));
    ad::Tensor sigma = tape.sqrt(tape.clamp_min(var, sigma_floor * sigma_floor));
    return {mu, sigma};
}

ad::Tensor node_strength_t(ad::Tape& tape, ad::Tensor adjacency) {
    std::size_t n = square_dim(adjacency.shape(), "node_strength");
    return tape.matmul(adjacency, ones_column(tape, n));
}

ad::Tensor symmetrize_clamp_t(ad::Tape& tape, ad::Tensor raw) {
    std::size_t n = square_dim(raw.shape(), "symmetrize_clamp");
    ad::Tensor sym = tape.scalar_mul(tape.add(raw, tape.transpose(raw)), 0.5);
    std::vector<double> mask(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 0.0;
    ad::Tensor off_diag = tape.mul(sym, tape.constant({n, n}, std::move(mask)));
    return tape.clamp(off_diag, 0.0, 1.0);
}

ConnectivityMatrix to_connectivity(ad::Tensor t) {
    std::size_t n = square_dim(t.shape(), "to_connectivity");
    ConnectivityMatrix out(n, t.value());
    // the masked diagonal can carry -0.0; canonicalize for clean serialization
    for (double& v : out.weights) {
        if (v == 0.0) v = 0.0;
    }
    return out;
}

} // namespace graphevo
