#include "graphevo/gnn.hpp"

#include "graphevo/version.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace graphevo {

using ad::Tape;
using ad::Tensor;
using ad::Variable;

// ---------------------------------------------------------------------------
// EccLayer
// ---------------------------------------------------------------------------

EccLayer::EccLayer(std::size_t in_dim, std::size_t out_dim)
    : d_in(in_dim),
      d_out(out_dim),
      filter_weight(Variable::zeros({in_dim * out_dim, 1})),
      filter_bias(Variable::zeros({in_dim * out_dim, 1})),
      bias(Variable::zeros({1, out_dim})) {
    if (d_in == 0 || d_out == 0) throw ContractError("EccLayer: dimensions must be positive");
}

void EccLayer::init(Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double& v : filter_weight.value()) v = rng.uniform(-bound, bound);
    for (double& v : filter_bias.value()) v = rng.uniform(-bound, bound);
    for (double& v : bias.value()) v = rng.uniform(-bound, bound);
}

std::vector<Variable*> EccLayer::parameters() { return {&filter_weight, &filter_bias, &bias}; }

namespace {

Tensor ones_column(Tape& tape, std::size_t n) { return tape.constant({n, 1}, std::vector<double>(n, 1.0)); }
Tensor ones_row(Tape& tape, std::size_t n) { return tape.constant({1, n}, std::vector<double>(n, 1.0)); }

} // namespace

Tensor ecc_forward(Tape& tape, EccLayer& layer, Tensor adjacency, Tensor features) {
    const ad::Shape& as = adjacency.shape();
    const ad::Shape& fs = features.shape();
    if (as.size() != 2 || as[0] != as[1]) {
        throw DimensionError("ecc_forward: adjacency must be square, got " + ad::shape_str(as));
    }
    std::size_t n = as[0];
    if (fs.size() != 2 || fs[0] != n || fs[1] != layer.d_in) {
        throw DimensionError("ecc_forward: features " + ad::shape_str(fs) + " do not match " + std::to_string(n) +
                             " nodes x d_in " + std::to_string(layer.d_in));
    }

    // Per-edge mixing split into the label-scaled part and the constant part:
    //   theta(L) = L*Wf + Cf, so  sum_theta(L(k',k)) y(k')
    //     = Wf * sum L(k',k) y(k')  +  Cf * sum_{k' in N(k)} y(k').
    Tensor wf_t = tape.transpose(tape.reshape(tape.leaf(layer.filter_weight), {layer.d_out, layer.d_in}));
    Tensor cf_t = tape.transpose(tape.reshape(tape.leaf(layer.filter_bias), {layer.d_out, layer.d_in}));
    Tensor p = tape.matmul(features, wf_t); // n x d_out
    Tensor q = tape.matmul(features, cf_t); // n x d_out

    // Membership and neighborhood sizes come from the adjacency VALUES and
    // are constants; N(k) = {k' : w[k'][k] > 0} plus a label-0 self-loop.
    const std::vector<double>& w = adjacency.value();
    std::vector<double> inv_deg(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t deg = 1;
        for (std::size_t kp = 0; kp < n; ++kp) {
            if (kp != k && w[kp * n + k] > 0.0) ++deg;
        }
        inv_deg[k] = 1.0 / static_cast<double>(deg);
    }
    std::vector<double> scaled_mask(n * n, 0.0);
    std::vector<double> row_scale(n * n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t kp = 0; kp < n; ++kp) {
            row_scale[k * n + kp] = inv_deg[k];
            if (kp == k || w[kp * n + k] > 0.0) scaled_mask[k * n + kp] = inv_deg[k];
        }
    }

    // Labels L(k',k) sit at [k][k'] of the transposed adjacency; non-edges
    // carry label 0 and self-loops sit on the zero diagonal, so the full
    // transposed matrix is exactly the label sum's coefficient matrix.
    Tensor labels = tape.mul(tape.transpose(adjacency), tape.constant({n, n}, std::move(row_scale)));
    Tensor mixed = tape.add(tape.matmul(labels, p), tape.matmul(tape.constant({n, n}, std::move(scaled_mask)), q));
    return tape.add(mixed, tape.matmul(ones_column(tape, n), tape.leaf(layer.bias)));
}

// ---------------------------------------------------------------------------
// BatchNorm
// ---------------------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t d)
    : dim(d), gamma(Variable::full({1, d}, 1.0)), beta(Variable::zeros({1, d})) {
    if (d == 0) throw ContractError("BatchNorm: dimension must be positive");
}

Tensor BatchNorm::forward(Tape& tape, Tensor features) {
    const ad::Shape& fs = features.shape();
    if (fs.size() != 2 || fs[1] != dim) {
        throw DimensionError("BatchNorm: features " + ad::shape_str(fs) + " do not match width " +
                             std::to_string(dim));
    }
    std::size_t n = fs[0];
    Tensor ones_n = ones_column(tape, n);

    Tensor count = tape.scalar_constant(static_cast<double>(n));
    Tensor mean_row = tape.div(tape.matmul(ones_row(tape, n), features), count);
    Tensor centered = tape.sub(features, tape.matmul(ones_n, mean_row));
    Tensor var_row = tape.div(tape.matmul(ones_row(tape, n), tape.mul(centered, centered)), count);
    Tensor denom_row = tape.sqrt(tape.add(var_row, tape.scalar_constant(eps)));
    Tensor xhat = tape.div(centered, tape.matmul(ones_n, denom_row));
    Tensor scaled = tape.mul(xhat, tape.matmul(ones_n, tape.leaf(gamma)));
    return tape.add(scaled, tape.matmul(ones_n, tape.leaf(beta)));
}

std::vector<Variable*> BatchNorm::parameters() { return {&gamma, &beta}; }

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

Generator::Generator(std::size_t n_r, std::size_t hidden, double dropout_rate)
    : ecc1(n_r, hidden),
      ecc2(hidden, hidden),
      ecc3(hidden, n_r),
      bn1(hidden),
      bn2(hidden),
      bn3(n_r),
      n_r_(n_r),
      hidden_(hidden),
      dropout_rate_(dropout_rate) {
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("Generator: dropout rate must lie in [0,1)");
    }
}

void Generator::init(Rng& rng) {
    ecc1.init(rng);
    ecc2.init(rng);
    ecc3.init(rng);
}

namespace {

Tensor dropout(Tape& tape, Tensor x, double rate, bool train, Rng* rng, const char* who) {
    if (!train || rate <= 0.0) return x;
    if (!rng) throw ContractError(std::string(who) + ": train-mode dropout needs an rng");
    double keep = 1.0 - rate;
    std::vector<double> mask(x.size());
    for (double& v : mask) v = (rng->uniform() < keep) ? 1.0 / keep : 0.0;
    return tape.mul(x, tape.constant(x.shape(), std::move(mask)));
}

} // namespace

Tensor Generator::forward(Tape& tape, Tensor adjacency, bool train, Rng* dropout_rng) {
    const ad::Shape& as = adjacency.shape();
    if (as.size() != 2 || as[0] != n_r_ || as[1] != n_r_) {
        throw DimensionError("generator: adjacency " + ad::shape_str(as) + " does not match n_r " +
                             std::to_string(n_r_));
    }
    Tensor h1 = tape.leaky_relu(bn1.forward(tape, ecc_forward(tape, ecc1, adjacency, adjacency)), 0.2);
    h1 = dropout(tape, h1, dropout_rate_, train, dropout_rng, "generator");
    Tensor h2 = tape.leaky_relu(bn2.forward(tape, ecc_forward(tape, ecc2, adjacency, h1)), 0.2);
    h2 = dropout(tape, h2, dropout_rate_, train, dropout_rng, "generator");
    Tensor h3 = bn3.forward(tape, ecc_forward(tape, ecc3, adjacency, h2));
    return symmetrize_clamp_t(tape, tape.add(h3, adjacency));
}

std::vector<Variable*> Generator::parameters() {
    std::vector<Variable*> out;
    for (EccLayer* l : {&ecc1, &ecc2, &ecc3})
        for (Variable* v : l->parameters()) out.push_back(v);
    for (BatchNorm* b : {&bn1, &bn2, &bn3})
        for (Variable* v : b->parameters()) out.push_back(v);
    return out;
}

std::vector<ad::NamedVariable> Generator::named_parameters(const std::string& prefix) {
    std::vector<ad::NamedVariable> out;
    const char* ecc_names[] = {"ecc1", "ecc2", "ecc3"};
    EccLayer* eccs[] = {&ecc1, &ecc2, &ecc3};
    for (int i = 0; i < 3; ++i) {
        out.push_back({prefix + "." + ecc_names[i] + ".filter_weight", &eccs[i]->filter_weight});
        out.push_back({prefix + "." + ecc_names[i] + ".filter_bias", &eccs[i]->filter_bias});
        out.push_back({prefix + "." + ecc_names[i] + ".bias", &eccs[i]->bias});
    }
    const char* bn_names[] = {"bn1", "bn2", "bn3"};
    BatchNorm* bns[] = {&bn1, &bn2, &bn3};
    for (int i = 0; i < 3; ++i) {
        out.push_back({prefix + "." + bn_names[i] + ".gamma", &bns[i]->gamma});
        out.push_back({prefix + "." + bn_names[i] + ".beta", &bns[i]->beta});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

Discriminator::Discriminator(std::size_t n_r, std::size_t hidden)
    : ecc1(2 * n_r, hidden), ecc2(hidden, 1), n_r_(n_r), hidden_(hidden) {}

void Discriminator::init(Rng& rng) {
    ecc1.init(rng);
    ecc2.init(rng);
}

Tensor Discriminator::forward(Tape& tape, Tensor judged, Tensor cond) {
    const ad::Shape& js = judged.shape();
    const ad::Shape& cs = cond.shape();
    if (js.size() != 2 || js[0] != n_r_ || js[1] != n_r_ || cs != js) {
        throw DimensionError("discriminator: graphs " + ad::shape_str(js) + " and " + ad::shape_str(cs) +
                             " do not match n_r " + std::to_string(n_r_));
    }
    Tensor feats = tape.concat(judged, cond, 1); // n x 2n
    Tensor h1 = tape.leaky_relu(ecc_forward(tape, ecc1, judged, feats), 0.2);
    Tensor score_col = ecc_forward(tape, ecc2, judged, h1); // n x 1
    return tape.sigmoid(tape.mean(score_col));
}

std::vector<Variable*> Discriminator::parameters() {
    std::vector<Variable*> out;
    for (EccLayer* l : {&ecc1, &ecc2})
        for (Variable* v : l->parameters()) out.push_back(v);
    return out;
}

std::vector<ad::NamedVariable> Discriminator::named_parameters(const std::string& prefix) {
    std::vector<ad::NamedVariable> out;
    const char* names[] = {"ecc1", "ecc2"};
    EccLayer* eccs[] = {&ecc1, &ecc2};
    for (int i = 0; i < 2; ++i) {
        out.push_back({prefix + "." + names[i] + ".filter_weight", &eccs[i]->filter_weight});
        out.push_back({prefix + "." + names[i] + ".filter_bias", &eccs[i]->filter_bias});
        out.push_back({prefix + "." + names[i] + ".bias", &eccs[i]->bias});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json ecc_to_json(const EccLayer& l) {
    return json{{"d_in", l.d_in},
                {"d_out", l.d_out},
                {"filter_weight", l.filter_weight.value()},
                {"filter_bias", l.filter_bias.value()},
                {"bias", l.bias.value()}};
}

json bn_to_json(const BatchNorm& b) {
    return json{{"gamma", b.gamma.value()}, {"beta", b.beta.value()}};
}

void array_into(const json& j, const char* field, std::vector<double>& dst, const std::string& where) {
    if (!j.contains(field) || !j[field].is_array() || j[field].size() != dst.size()) {
        throw DataError(where + ": field '" + field + "' missing or wrong length");
    }
    std::vector<double> tmp = j[field].get<std::vector<double>>();
    dst = std::move(tmp);
}

void ecc_from_json(const json& j, EccLayer& l, const std::string& where) {
    if (j.value("d_in", std::size_t(0)) != l.d_in || j.value("d_out", std::size_t(0)) != l.d_out) {
        throw DataError(where + ": layer dimensions do not match the constructed network");
    }
    array_into(j, "filter_weight", l.filter_weight.value(), where);
    array_into(j, "filter_bias", l.filter_bias.value(), where);
    array_into(j, "bias", l.bias.value(), where);
}

void bn_from_json(const json& j, BatchNorm& b, const std::string& where) {
    array_into(j, "gamma", b.gamma.value(), where);
    array_into(j, "beta", b.beta.value(), where);
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Generator& g, const Discriminator& d,
                     const std::string& config_hash) {
    json j;
    j["format"] = "graphevo-checkpoint";
    j["version"] = 1;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = config_hash;
    j["n_r"] = g.n_r();
    j["generator"] = {{"hidden", g.hidden()}, {"dropout", g.dropout_rate()},
                      {"ecc1", ecc_to_json(g.ecc1)},  {"ecc2", ecc_to_json(g.ecc2)},
                      {"ecc3", ecc_to_json(g.ecc3)},  {"bn1", bn_to_json(g.bn1)},
                      {"bn2", bn_to_json(g.bn2)},     {"bn3", bn_to_json(g.bn3)}};
    j["discriminator"] = {
        {"hidden", d.hidden()}, {"ecc1", ecc_to_json(d.ecc1)}, {"ecc2", ecc_to_json(d.ecc2)}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint " + path.string() + ": cannot open for writing");
    out << j.dump(1) << '\n';
    if (!out) throw DataError("checkpoint " + path.string() + ": write failed");
}

void load_checkpoint(const std::filesystem::path& path, Generator& g, Discriminator& d,
                     std::string* config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint " + path.string() + ": cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("checkpoint " + path.string() + ": " + e.what());
    }
    const std::string where = "checkpoint " + path.string();
    try {
        if (j.value("format", "") != "graphevo-checkpoint") throw DataError(where + ": not a checkpoint file");
        if (j.value("version", 0) != 1) throw DataError(where + ": unsupported version");
        if (j.value("n_r", std::size_t(0)) != g.n_r() || j.value("n_r", std::size_t(0)) != d.n_r()) {
            throw DataError(where + ": node count does not match the constructed networks");
        }
        const json& gj = j.at("generator");
        ecc_from_json(gj.at("ecc1"), g.ecc1, where);
        ecc_from_json(gj.at("ecc2"), g.ecc2, where);
        ecc_from_json(gj.at("ecc3"), g.ecc3, where);
        bn_from_json(gj.at("bn1"), g.bn1, where);
        bn_from_json(gj.at("bn2"), g.bn2, where);
        bn_from_json(gj.at("bn3"), g.bn3, where);
        const json& dj = j.at("discriminator");
        ecc_from_json(dj.at("ecc1"), d.ecc1, where);
        ecc_from_json(dj.at("ecc2"), d.ecc2, where);
        if (config_hash) *config_hash = j.value("config_hash", "");
    } catch (const json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
}

} // namespace graphevo
