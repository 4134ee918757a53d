#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "graphevo/graph.hpp"
#include "graphevo/rng.hpp"
#include "graphevo/tensor.hpp"

namespace graphevo {

/// Edge-conditioned convolution layer. A per-edge mixing matrix is produced
/// from the scalar edge label by an affine filter network
///   F(label) = reshape(label * filter_weight + filter_bias, d_out x d_in)
/// and node k aggregates the mixed features of its neighborhood
/// (positive-weight in-edges plus a label-0 self-loop), averaged by
/// neighborhood size, plus the layer bias.
struct EccLayer {
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    ad::Variable filter_weight; // (d_out*d_in) x 1
    ad::Variable filter_bias;   // (d_out*d_in) x 1
    ad::Variable bias;          // 1 x d_out

    EccLayer(std::size_t in_dim, std::size_t out_dim);

    /// Uniform [-1/sqrt(d_in), 1/sqrt(d_in)] for all three arrays, drawn in
    /// declaration order.
    void init(Rng& rng);
    std::vector<ad::Variable*> parameters();
};

/// adjacency: n x n edge weights (labels); must be square and match
/// features rows. Neighborhood membership and sizes are read from the
/// adjacency VALUES and enter the graph as constants; the labels themselves
/// stay differentiable, so gradients reach an upstream generator through
/// the edges it produced.
ad::Tensor ecc_forward(ad::Tape& tape, EccLayer& layer, ad::Tensor adjacency, ad::Tensor features);

/// Batch normalization over the node dimension, one statistic per feature,
/// always from the nodes currently being processed (biased variance). A
/// graph's node set is fully present in every pass, so there is no
/// small-batch regime to smooth over with running aggregates, and inference
/// stays deterministic and consistent with training.
struct BatchNorm {
    std::size_t dim = 0;
    ad::Variable gamma; // 1 x d
    ad::Variable beta;  // 1 x d
    double eps = 1e-5;

    explicit BatchNorm(std::size_t d);
    ad::Tensor forward(ad::Tape& tape, ad::Tensor features);
    std::vector<ad::Variable*> parameters();
};

/// Three ECC layers (n_r -> hidden -> hidden -> n_r), each batch-normalized;
/// the two hidden layers get leaky_relu and dropout, the last layer's output
/// is left linear, the input adjacency is added back (the single residual
/// skip), and the sum is symmetrized and clamped into a valid graph.
class Generator {
public:
    Generator(std::size_t n_r, std::size_t hidden, double dropout_rate);
    Generator(const Generator&) = delete;
    Generator& operator=(const Generator&) = delete;

    void init(Rng& rng);

    /// Returns the predicted adjacency (n_r x n_r, valid connectivity values).
    /// train=true draws dropout masks from `dropout_rng` (required unless the
    /// dropout rate is 0); eval only disables dropout.
    ad::Tensor forward(ad::Tape& tape, ad::Tensor adjacency, bool train, Rng* dropout_rng = nullptr);

    std::vector<ad::Variable*> parameters();
    std::vector<ad::NamedVariable> named_parameters(const std::string& prefix);

    std::size_t n_r() const { return n_r_; }
    std::size_t hidden() const { return hidden_; }
    double dropout_rate() const { return dropout_rate_; }

    EccLayer ecc1, ecc2, ecc3;
    BatchNorm bn1, bn2, bn3;

private:
    std::size_t n_r_;
    std::size_t hidden_;
    double dropout_rate_;
};

/// Two ECC layers (2*n_r -> hidden -> 1) over the judged graph's edges,
/// followed by sigmoid of the mean node output. Node features are the
/// concatenated adjacency rows of the judged and conditioning graphs.
class Discriminator {
public:
    Discriminator(std::size_t n_r, std::size_t hidden);
    Discriminator(const Discriminator&) = delete;
    Discriminator& operator=(const Discriminator&) = delete;

    void init(Rng& rng);

    /// Realness score of `judged`, strictly inside (0,1).
    ad::Tensor forward(ad::Tape& tape, ad::Tensor judged, ad::Tensor cond);

    std::vector<ad::Variable*> parameters();
    std::vector<ad::NamedVariable> named_parameters(const std::string& prefix);

    std::size_t n_r() const { return n_r_; }
    std::size_t hidden() const { return hidden_; }

    EccLayer ecc1, ecc2;

private:
    std::size_t n_r_;
    std::size_t hidden_;
};

/// Checkpoint container: versioned JSON holding every parameter array plus
/// the training config hash. Numbers are
/// written in shortest round-trip form, so save -> load -> forward is
/// bitwise identical.
void save_checkpoint(const std::filesystem::path& path, const Generator& g, const Discriminator& d,
                     const std::string& config_hash);

/// Throws DataError naming the file on parse or shape mismatch. The networks
/// must be constructed with matching dimensions beforehand.
void load_checkpoint(const std::filesystem::path& path, Generator& g, Discriminator& d,
                     std::string* config_hash = nullptr);

} // namespace graphevo
