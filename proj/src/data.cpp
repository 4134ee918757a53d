#include "graphevo/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "graphevo/errors.hpp"
#include "graphevo/serialize.hpp"

namespace graphevo {

namespace {

constexpr double kLoadTolerance = 1e-9;

std::string cell_name(const std::filesystem::path& path, std::size_t row, std::size_t col) {
    return path.string() + " row " + std::to_string(row + 1) + " column " + std::to_string(col + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string chomp(std::string line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return line;
}

} // namespace

void SyntheticConfig::check() const {
    if (n_subjects < 1) throw ConfigError("synthetic config: need at least one subject");
    if (n_r < 2) throw ConfigError("synthetic config: need at least 2 regions");
    if (timepoints < 2) throw ConfigError("synthetic config: need at least 2 timepoints");
    if (drift_scale < 0.0 || noise_scale < 0.0) {
        throw ConfigError("synthetic config: scales must be non-negative");
    }
    if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
        throw ConfigError("synthetic config: sparsity must lie in [0,1]");
    }
}

std::vector<LongitudinalSample> generate_synthetic(const SyntheticConfig& cfg) {
    cfg.check();
    Rng rng(cfg.seed);
    std::vector<LongitudinalSample> out;
    out.reserve(cfg.n_subjects);
    for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
        char id[16];
        std::snprintf(id, sizeof(id), "s%03zu", s);
        LongitudinalSample sample;
        sample.subject_id = id;

        ConnectivityMatrix g = ConnectivityMatrix::zeros(cfg.n_r);
        for (std::size_t i = 0; i < cfg.n_r; ++i)
            for (std::size_t j = i + 1; j < cfg.n_r; ++j) g.at(i, j) = g.at(j, i) = rng.uniform();
        sample.graphs.push_back(g);

        for (std::size_t t = 1; t < cfg.timepoints; ++t) {
            ConnectivityMatrix next = sample.graphs.back();
            for (std::size_t i = 0; i < cfg.n_r; ++i) {
                for (std::size_t j = i + 1; j < cfg.n_r; ++j) {
                    // all three draws happen whatever the scales are, so
                    // datasets at different scales stay edge-for-edge comparable
                    bool drifts = rng.bernoulli(cfg.sparsity);
                    double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
                    double eps = rng.normal();
                    double v = next.at(i, j) + (drifts ? sign * cfg.drift_scale : 0.0) +
                               cfg.noise_scale * eps;
                    v = std::min(1.0, std::max(0.0, v));
                    if (v == 0.0) v = 0.0; // drop any negative zero
                    next.at(i, j) = next.at(j, i) = v;
                }
            }
            sample.graphs.push_back(std::move(next));
        }
        out.push_back(std::move(sample));
    }
    return out;
}

ConnectivityMatrix load_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        line = chomp(line);
        if (line.empty()) continue;
        std::vector<std::string> cells = split(line, ',');
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            try {
                row.push_back(parse_double(cells[c]));
            } catch (const DataError& e) {
                throw DataError(cell_name(path, rows.size(), c) + ": " + e.what());
            }
        }
        rows.push_back(std::move(row));
    }
    const std::size_t n = rows.size();
    if (n < 2) throw DataError(path.string() + ": a graph needs at least 2 rows, found " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) {
            throw DataError(path.string() + " row " + std::to_string(i + 1) + ": expected " +
                            std::to_string(n) + " columns, found " + std::to_string(rows[i].size()));
        }
    }

    ConnectivityMatrix g = ConnectivityMatrix::zeros(n);
    bool asymmetry_warned = false;
    for (std::size_t i = 0; i < n; ++i) {
        double d = rows[i][i];
        if (!(d >= -kLoadTolerance && d <= kLoadTolerance)) {
            throw DataError(cell_name(path, i, i) + ": diagonal entry " + format_double(d) +
                            " must be 0");
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            double a = rows[i][j];
            double b = rows[j][i];
            if (!(std::fabs(a - b) <= kLoadTolerance)) {
                throw DataError(cell_name(path, i, j) + ": entry " + format_double(a) +
                                " does not match its mirror " + format_double(b));
            }
            if (a != b) {
                if (!asymmetry_warned) {
                    std::cerr << "warning: " << path.string()
                              << ": tiny asymmetry averaged away during load\n";
                    asymmetry_warned = true;
                }
                a = 0.5 * (a + b);
            }
            if (!(a >= -kLoadTolerance && a <= 1.0 + kLoadTolerance)) {
                throw DataError(cell_name(path, i, j) + ": entry " + format_double(rows[i][j]) +
                                " outside [0,1]");
            }
            a = std::min(1.0, std::max(0.0, a));
            if (a == 0.0) a = 0.0; // drop any negative zero
            g.at(i, j) = g.at(j, i) = a;
        }
    }
    return g;
}

void save_matrix_csv(const std::filesystem::path& path, const ConnectivityMatrix& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (std::size_t i = 0; i < g.n_r; ++i) {
        for (std::size_t j = 0; j < g.n_r; ++j) {
            if (j > 0) out << ',';
            out << format_double(g.at(i, j));
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<LongitudinalSample> load_dataset(const std::filesystem::path& path) {
    // Accept the dataset directory as a convenience; an ifstream on a
    // directory would "open" and then read nothing, which looks like an
    // empty manifest instead of a usage error.
    const std::filesystem::path manifest =
        std::filesystem::is_directory(path) ? path / "manifest.txt" : path;
    std::ifstream in(manifest, std::ios::binary);
    if (!in) throw DataError("cannot open manifest " + manifest.string());
    const std::filesystem::path root = manifest.parent_path();

    std::size_t n_r = 0;
    std::size_t timepoints = 0;
    std::vector<LongitudinalSample> samples;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& what) {
        throw DataError(manifest.string() + " line " + std::to_string(line_no) + ": " + what);
    };

    while (std::getline(in, line)) {
        ++line_no;
        line = chomp(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream words(line);
        std::string key;
        words >> key;
        if (key == "n_r") {
            if (!(words >> n_r) || n_r < 2) fail("n_r needs an integer of at least 2");
        } else if (key == "timepoints") {
            if (!(words >> timepoints) || timepoints < 2) fail("timepoints needs an integer of at least 2");
        } else if (key == "subject") {
            if (n_r == 0 || timepoints == 0) fail("subject listed before n_r and timepoints");
            LongitudinalSample s;
            if (!(words >> s.subject_id)) fail("subject needs an id");
            std::string file;
            while (words >> file) {
                ConnectivityMatrix g = load_matrix_csv(root / file);
                if (g.n_r != n_r) {
                    throw DataError((root / file).string() + ": expected " + std::to_string(n_r) +
                                    " regions, found " + std::to_string(g.n_r));
                }
                s.graphs.push_back(std::move(g));
            }
            if (s.graphs.size() != timepoints) {
                fail("subject " + s.subject_id + " lists " + std::to_string(s.graphs.size()) +
                     " files, manifest declares " + std::to_string(timepoints));
            }
            samples.push_back(std::move(s));
        } else {
            fail("unknown directive '" + key + "'");
        }
    }

    std::sort(samples.begin(), samples.end(),
              [](const LongitudinalSample& a, const LongitudinalSample& b) {
                  return a.subject_id < b.subject_id;
              });
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].subject_id == samples[i - 1].subject_id) {
            throw DataError(manifest.string() + ": duplicate subject id " + samples[i].subject_id);
        }
    }
    if (samples.empty()) {
        std::cerr << "warning: manifest " << manifest.string() << " lists no subjects\n";
    } else {
        std::cerr << "loaded " << samples.size() << " subjects (" << n_r << " regions, " << timepoints
                  << " timepoints)\n";
    }
    return samples;
}

std::filesystem::path save_dataset(const std::filesystem::path& dir,
                                   const std::vector<LongitudinalSample>& samples) {
    if (samples.empty()) throw DataError("refusing to save an empty dataset");
    for (const LongitudinalSample& s : samples) s.check();
    const std::size_t timepoints = samples.front().graphs.size();
    const std::size_t n_r = samples.front().graphs.front().n_r;
    for (const LongitudinalSample& s : samples) {
        if (s.graphs.size() != timepoints || s.graphs.front().n_r != n_r) {
            throw DataError("subject " + s.subject_id + " does not match the dataset shape");
        }
    }

    std::filesystem::create_directories(dir);
    std::ofstream manifest_out;
    const std::filesystem::path manifest = dir / "manifest.txt";
    manifest_out.open(manifest, std::ios::binary);
    if (!manifest_out) throw DataError("cannot write " + manifest.string());
    manifest_out << "# generated dataset: one CSV per subject and timepoint\n";
    manifest_out << "n_r " << n_r << "\n";
    manifest_out << "timepoints " << timepoints << "\n";
    for (const LongitudinalSample& s : samples) {
        manifest_out << "subject " << s.subject_id;
        for (std::size_t t = 0; t < timepoints; ++t) {
            std::string name = s.subject_id + "_t" + std::to_string(t) + ".csv";
            save_matrix_csv(dir / name, s.graphs[t]);
            manifest_out << ' ' << name;
        }
        manifest_out << "\n";
    }
    if (!manifest_out) throw DataError("write failed for " + manifest.string());
    return manifest;
}

} // namespace graphevo
