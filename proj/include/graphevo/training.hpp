#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "graphevo/gnn.hpp"
#include "graphevo/losses.hpp"

namespace graphevo {

/// Adam with decoupled weight decay: the decay term multiplies the parameter
/// directly and never enters the moment estimates.
class AdamW {
public:
    struct Params {
        double lr = 0.001;
        double beta1 = 0.5;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    /// Throws ContractError when a parameter cannot carry gradients.
    AdamW(std::vector<ad::Variable*> parameters, Params hp);

    /// One update from the gradients currently stored on the variables.
    void step();
    void zero_grad();
    std::size_t step_count() const { return steps_; }
    const Params& params() const { return hp_; }

private:
    std::vector<ad::Variable*> params_;
    Params hp_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t steps_ = 0;
};

struct FoldSplit {
    std::vector<std::size_t> train_ids;
    std::vector<std::size_t> test_ids;
};

/// Seeded shuffled k-fold partition of subject indices 0..n_subjects-1.
/// Test sizes differ by at most one (earlier folds take the remainder);
/// ids within each list come back sorted. Throws ConfigError unless
/// 2 <= folds <= n_subjects.
std::vector<FoldSplit> kfold_split(std::size_t n_subjects, std::size_t folds, std::uint64_t seed);

struct TrainConfig {
    std::size_t timepoints = 2; // predicted follow-ups, one generator/discriminator pair each
    std::size_t epochs = 500;
    std::size_t folds = 3;
    std::size_t hidden = 0; // 0: use the region count
    double dropout = 0.3;
    double sigma_floor = kSigmaFloor;
    bool chain_backprop = true; // later-stage losses reach earlier generators
    LossWeights weights;
    double lr_g = 0.01;
    double lr_d = 0.0002;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    std::uint64_t seed = 42;

    void check() const; // throws ConfigError
};

/// Per-stage training means over one epoch. g_total already carries the
/// loss weights; the raw columns do not.
struct LossRecord {
    std::size_t epoch = 0;
    std::size_t stage = 0; // 1-based follow-up index
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_l1 = 0.0;
    double g_kl_or_topo = 0.0;
    double g_total = 0.0;
};

/// CSV with header epoch,stage,d_loss,g_adv,g_l1,g_kl_or_topo,g_total and
/// shortest round-trip numbers.
void write_loss_history(const std::filesystem::path& path, const std::vector<LossRecord>& records);

/// Chain of generator/discriminator pairs, one per follow-up timepoint.
/// Stage i maps the graph at t_{i-1} (observed for i=1, predicted after)
/// to a prediction at t_i. Training alternates one full-batch
/// discriminator update and one joint full-batch generator update per
/// epoch; everything is driven by the config seed, so identical inputs
/// reproduce identical parameters and histories.
class CascadeTrainer {
public:
    CascadeTrainer(std::size_t n_r, TrainConfig config);
    CascadeTrainer(const CascadeTrainer&) = delete;
    CascadeTrainer& operator=(const CascadeTrainer&) = delete;

    /// Runs config.epochs alternating passes over the subjects. Each sample
    /// needs at least timepoints+1 graphs (extra trailing ones are ignored).
    /// Returns one record per (epoch, stage), epochs numbered from 1.
    std::vector<LossRecord> train(const std::vector<LongitudinalSample>& subjects);

    /// One full-batch discriminator update against frozen generators.
    /// Returns the per-stage mean discriminator losses.
    std::vector<double> epoch_discriminator_pass(const std::vector<LongitudinalSample>& subjects);

    /// One joint full-batch generator update against frozen discriminators.
    /// Returns per-stage records with epoch and d_loss left unset.
    std::vector<LossRecord> epoch_generator_pass(const std::vector<LongitudinalSample>& subjects);

    /// Rolls the chain in eval mode; returns predictions at t_1..t_m.
    std::vector<ConnectivityMatrix> predict(const ConnectivityMatrix& baseline);

    std::size_t stages() const { return generators_.size(); }
    std::size_t n_r() const { return n_r_; }
    const TrainConfig& config() const { return config_; }
    Generator& generator(std::size_t stage) { return *generators_.at(stage); }
    Discriminator& discriminator(std::size_t stage) { return *discriminators_.at(stage); }
    AdamW& generator_optimizer(std::size_t stage) { return *g_opt_.at(stage); }
    AdamW& discriminator_optimizer(std::size_t stage) { return *d_opt_.at(stage); }

    /// One checkpoint file per stage (stage1.ckpt, stage2.ckpt, ...).
    void save(const std::filesystem::path& dir, const std::string& config_hash) const;
    void load(const std::filesystem::path& dir, const std::string* config_hash = nullptr);

private:
    struct ChainRollout {
        std::vector<ad::Tensor> inputs;  // what each stage consumed (post-detach)
        std::vector<ad::Tensor> outputs; // each stage's prediction
    };
    ChainRollout roll_chain(ad::Tape& tape, const ConnectivityMatrix& baseline, bool train_mode,
                            bool frozen_params);
    void check_subjects(const std::vector<LongitudinalSample>& subjects) const;

    std::size_t n_r_;
    TrainConfig config_;
    std::vector<std::unique_ptr<Generator>> generators_;
    std::vector<std::unique_ptr<Discriminator>> discriminators_;
    std::vector<std::unique_ptr<AdamW>> g_opt_;
    std::vector<std::unique_ptr<AdamW>> d_opt_;
    Rng train_rng_; // dropout mask stream, advanced by both passes
};

} // namespace graphevo
