#include "graphevo/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>

#include "graphevo/serialize.hpp"

namespace graphevo {

AdamW::AdamW(std::vector<ad::Variable*> parameters, Params hp)
    : params_(std::move(parameters)), hp_(std::move(hp)) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ad::Variable* p : params_) {
        if (p == nullptr || !p->requires_grad()) {
            throw ContractError("optimizer parameter cannot carry gradients");
        }
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void AdamW::step() {
    ++steps_;
    const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(steps_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
        std::vector<double>& theta = params_[p]->value();
        const std::vector<double>& g = params_[p]->grad();
        std::vector<double>& m = m_[p];
        std::vector<double>& v = v_[p];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = hp_.beta1 * m[j] + (1.0 - hp_.beta1) * g[j];
            v[j] = hp_.beta2 * v[j] + (1.0 - hp_.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            theta[j] -= hp_.lr * (m_hat / (std::sqrt(v_hat) + hp_.eps) + hp_.weight_decay * theta[j]);
        }
    }
}

void AdamW::zero_grad() {
    for (ad::Variable* p : params_) p->zero_grad();
}

std::vector<FoldSplit> kfold_split(std::size_t n_subjects, std::size_t folds, std::uint64_t seed) {
    if (folds < 2) throw ConfigError("kfold_split: need at least 2 folds");
    if (folds > n_subjects) {
        throw ConfigError("kfold_split: " + std::to_string(folds) + " folds exceed " +
                          std::to_string(n_subjects) + " subjects");
    }
    std::vector<std::size_t> ids(n_subjects);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n_subjects - 1; i > 0; --i) {
        std::swap(ids[i], ids[rng.index(i + 1)]);
    }

    std::vector<FoldSplit> splits(folds);
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        std::size_t take = n_subjects / folds + (f < n_subjects % folds ? 1 : 0);
        splits[f].test_ids.assign(ids.begin() + cursor, ids.begin() + cursor + take);
        cursor += take;
    }
    for (std::size_t f = 0; f < folds; ++f) {
        for (std::size_t g = 0; g < folds; ++g) {
            if (g == f) continue;
            splits[f].train_ids.insert(splits[f].train_ids.end(), splits[g].test_ids.begin(),
                                       splits[g].test_ids.end());
        }
        std::sort(splits[f].train_ids.begin(), splits[f].train_ids.end());
        std::sort(splits[f].test_ids.begin(), splits[f].test_ids.end());
    }
    return splits;
}

void TrainConfig::check() const {
    if (timepoints < 1) throw ConfigError("config: need at least one predicted timepoint");
    if (epochs < 1) throw ConfigError("config: epochs must be at least 1");
    if (folds < 2) throw ConfigError("config: folds must be at least 2");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("config: dropout must lie in [0,1)");
    if (!(sigma_floor > 0.0)) throw ConfigError("config: sigma_floor must be positive");
    if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("config: learning rates must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("config: betas must lie in [0,1)");
    }
    if (!(weight_decay >= 0.0)) throw ConfigError("config: weight_decay must be non-negative");
    weights.check();
}

void write_loss_history(const std::filesystem::path& path, const std::vector<LossRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch,stage,d_loss,g_adv,g_l1,g_kl_or_topo,g_total\n";
    for (const LossRecord& r : records) {
        out << r.epoch << ',' << r.stage << ',' << format_double(r.d_loss) << ','
            << format_double(r.g_adv) << ',' << format_double(r.g_l1) << ','
            << format_double(r.g_kl_or_topo) << ',' << format_double(r.g_total) << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

CascadeTrainer::CascadeTrainer(std::size_t n_r, TrainConfig config)
    : n_r_(n_r), config_(std::move(config)), train_rng_(0) {
    config_.check();
    if (n_r < 2) throw ConfigError("config: need at least 2 regions");
    const std::size_t hidden = config_.hidden == 0 ? n_r : config_.hidden;

    // one init stream, consumed in stage order, then an independent stream
    // for dropout masks
    Rng init_rng(config_.seed);
    train_rng_ = init_rng.fork(1);
    for (std::size_t i = 0; i < config_.timepoints; ++i) {
        auto g = std::make_unique<Generator>(n_r, hidden, config_.dropout);
        g->init(init_rng);
        auto d = std::make_unique<Discriminator>(n_r, hidden);
        d->init(init_rng);

        AdamW::Params gp{config_.lr_g, config_.beta1, config_.beta2, 1e-8, config_.weight_decay};
        AdamW::Params dp{config_.lr_d, config_.beta1, config_.beta2, 1e-8, config_.weight_decay};
        g_opt_.push_back(std::make_unique<AdamW>(g->parameters(), gp));
        d_opt_.push_back(std::make_unique<AdamW>(d->parameters(), dp));
        generators_.push_back(std::move(g));
        discriminators_.push_back(std::move(d));
    }
}

void CascadeTrainer::check_subjects(const std::vector<LongitudinalSample>& subjects) const {
    if (subjects.empty()) throw DataError("training set is empty");
    for (const LongitudinalSample& s : subjects) {
        s.check();
        if (s.graphs.size() < config_.timepoints + 1) {
            throw DataError("subject " + s.subject_id + " has " + std::to_string(s.graphs.size()) +
                            " timepoints, need " + std::to_string(config_.timepoints + 1));
        }
        if (s.graphs[0].n_r != n_r_) {
            throw DataError("subject " + s.subject_id + " has " + std::to_string(s.graphs[0].n_r) +
                            " regions, trainer expects " + std::to_string(n_r_));
        }
    }
}

CascadeTrainer::ChainRollout CascadeTrainer::roll_chain(ad::Tape& tape,
                                                        const ConnectivityMatrix& baseline,
                                                        bool train_mode, bool frozen_params) {
    ChainRollout roll;
    ad::Tensor prev = tape.constant({n_r_, n_r_}, baseline.weights);
    for (std::size_t i = 0; i < generators_.size(); ++i) {
        ad::Tensor input = prev;
        if (!config_.chain_backprop && i > 0) input = tape.detach(prev);
        roll.inputs.push_back(input);
        Rng* rng = train_mode ? &train_rng_ : nullptr;
        ad::Tensor out;
        if (frozen_params) {
            ad::FreezeLeaves guard(tape);
            out = generators_[i]->forward(tape, input, train_mode, rng);
        } else {
            out = generators_[i]->forward(tape, input, train_mode, rng);
        }
        roll.outputs.push_back(out);
        prev = out;
    }
    return roll;
}

std::vector<double> CascadeTrainer::epoch_discriminator_pass(
    const std::vector<LongitudinalSample>& subjects) {
    check_subjects(subjects);
    const std::size_t m = stages();
    const double n_s = static_cast<double>(subjects.size());
    for (auto& opt : d_opt_) opt->zero_grad();

    std::vector<double> loss_sum(m, 0.0);
    for (const LongitudinalSample& s : subjects) {
        ad::Tape tape;
        // fakes come from frozen generators, so they enter as plain values
        // (the detach the update rule asks for) and backward stays cheap
        ChainRollout roll = roll_chain(tape, s.graphs[0], /*train_mode=*/true, /*frozen_params=*/true);
        ad::Tensor root;
        for (std::size_t i = 0; i < m; ++i) {
            ad::Tensor cond = tape.constant({n_r_, n_r_}, s.graphs[i + 1].weights);
            ad::Tensor score_real = discriminators_[i]->forward(tape, cond, cond);
            ad::Tensor score_fake = discriminators_[i]->forward(tape, roll.outputs[i], cond);
            ad::Tensor loss = adversarial_loss_d_t(tape, score_real, score_fake);
            loss_sum[i] += loss.scalar();
            ad::Tensor scaled = tape.scalar_mul(loss, 1.0 / n_s);
            root = (i == 0) ? scaled : tape.add(root, scaled);
        }
        tape.backward(root);
    }
    for (auto& opt : d_opt_) opt->step();

    for (double& v : loss_sum) v /= n_s;
    return loss_sum;
}

std::vector<LossRecord> CascadeTrainer::epoch_generator_pass(
    const std::vector<LongitudinalSample>& subjects) {
    check_subjects(subjects);
    const std::size_t m = stages();
    const double n_s = static_cast<double>(subjects.size());
    const LossWeights& w = config_.weights;
    for (auto& opt : g_opt_) opt->zero_grad();

    std::vector<double> sum_adv(m, 0.0), sum_l1(m, 0.0), sum_third(m, 0.0);
    for (const LongitudinalSample& s : subjects) {
        ad::Tape tape;
        ChainRollout roll = roll_chain(tape, s.graphs[0], /*train_mode=*/true, /*frozen_params=*/false);
        ad::Tensor root;
        for (std::size_t i = 0; i < m; ++i) {
            const ConnectivityMatrix& truth = s.graphs[i + 1];
            ad::Tensor cond = tape.constant({n_r_, n_r_}, truth.weights);
            ad::Tensor score_fake;
            {
                ad::FreezeLeaves guard(tape); // judge without training the judge
                score_fake = discriminators_[i]->forward(tape, roll.outputs[i], cond);
            }
            ad::Tensor adv = adversarial_loss_g_t(tape, score_fake);
            // time-dependency term: what this stage consumed against what it
            // must produce; at stage 1 that input is the observed baseline
            ad::Tensor l1 = l1_loss_t(tape, roll.inputs[i], cond);

            ad::Tensor stage = tape.add(tape.scalar_mul(adv, w.lambda1), tape.scalar_mul(l1, w.lambda2));
            double third_value = 0.0;
            if (w.variant != LossVariant::NoKl) {
                ad::Tensor third = w.variant == LossVariant::Full
                                       ? kl_loss_t(tape, roll.outputs[i], truth, config_.sigma_floor)
                                       : topology_loss_t(tape, roll.outputs[i], truth);
                third_value = third.scalar();
                stage = tape.add(stage, tape.scalar_mul(third, w.lambda3));
            }
            sum_adv[i] += adv.scalar();
            sum_l1[i] += l1.scalar();
            sum_third[i] += third_value;

            ad::Tensor scaled = tape.scalar_mul(stage, 1.0 / n_s);
            root = (i == 0) ? scaled : tape.add(root, scaled);
        }
        tape.backward(root);
    }
    for (auto& opt : g_opt_) opt->step();

    std::vector<LossRecord> records(m);
    for (std::size_t i = 0; i < m; ++i) {
        LossRecord& r = records[i];
        r.stage = i + 1;
        r.g_adv = sum_adv[i] / n_s;
        r.g_l1 = sum_l1[i] / n_s;
        r.g_kl_or_topo = sum_third[i] / n_s;
        r.g_total = w.lambda1 * r.g_adv + w.lambda2 * r.g_l1 +
                    (w.variant == LossVariant::NoKl ? 0.0 : w.lambda3 * r.g_kl_or_topo);
    }
    return records;
}

std::vector<LossRecord> CascadeTrainer::train(const std::vector<LongitudinalSample>& subjects) {
    check_subjects(subjects);
    std::vector<LossRecord> history;
    history.reserve(config_.epochs * stages());
    for (std::size_t epoch = 1; epoch <= config_.epochs; ++epoch) {
        std::vector<double> d_losses = epoch_discriminator_pass(subjects);
        std::vector<LossRecord> records = epoch_generator_pass(subjects);
        for (std::size_t i = 0; i < records.size(); ++i) {
            records[i].epoch = epoch;
            records[i].d_loss = d_losses[i];
            if (!std::isfinite(records[i].g_total) || !std::isfinite(records[i].d_loss)) {
                throw NumericError("loss diverged at epoch " + std::to_string(epoch) + ", stage " +
                                   std::to_string(i + 1));
            }
            history.push_back(records[i]);
        }
    }
    return history;
}

std::vector<ConnectivityMatrix> CascadeTrainer::predict(const ConnectivityMatrix& baseline) {
    baseline.check();
    if (baseline.n_r != n_r_) {
        throw DimensionError("predict: baseline has " + std::to_string(baseline.n_r) +
                             " regions, trainer expects " + std::to_string(n_r_));
    }
    std::vector<ConnectivityMatrix> out;
    ConnectivityMatrix prev = baseline;
    for (auto& g : generators_) {
        ad::Tape tape;
        ad::Tensor x = tape.constant({n_r_, n_r_}, prev.weights);
        prev = to_connectivity(g->forward(tape, x, /*train=*/false));
        out.push_back(prev);
    }
    return out;
}

void CascadeTrainer::save(const std::filesystem::path& dir, const std::string& config_hash) const {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < generators_.size(); ++i) {
        save_checkpoint(dir / ("stage" + std::to_string(i + 1) + ".ckpt"), *generators_[i],
                        *discriminators_[i], config_hash);
    }
}

void CascadeTrainer::load(const std::filesystem::path& dir, const std::string* config_hash) {
    std::string stored;
    for (std::size_t i = 0; i < generators_.size(); ++i) {
        // all stages carry the same hash; the first one stands for the run
        load_checkpoint(dir / ("stage" + std::to_string(i + 1) + ".ckpt"), *generators_[i],
                        *discriminators_[i], i == 0 ? &stored : nullptr);
    }
    if (config_hash != nullptr && stored != *config_hash) {
        throw DataError("checkpoint config hash " + stored + " does not match " + *config_hash);
    }
}

} // namespace graphevo
