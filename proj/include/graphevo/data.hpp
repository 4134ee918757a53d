#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "graphevo/graph.hpp"
#include "graphevo/rng.hpp"

namespace graphevo {

/// Synthetic longitudinal connectomes: a random baseline graph per subject
/// plus, per follow-up, a sparse random-sign drift and dense Gaussian noise.
struct SyntheticConfig {
    std::size_t n_subjects = 30;
    std::size_t n_r = 35;
    std::size_t timepoints = 3; // total observations including the baseline
    double drift_scale = 0.05;  // magnitude of each drifting edge's step
    double noise_scale = 0.01;  // standard deviation of the per-edge noise
    double sparsity = 0.1;      // fraction of edges drifting per step
    std::uint64_t seed = 7;

    void check() const; // throws ConfigError
};

std::vector<LongitudinalSample> generate_synthetic(const SyntheticConfig& cfg);

/// n_r rows of n_r comma-separated decimals, no header. Loading tolerates
/// deviations up to 1e-9 (asymmetry is averaged away with a warning, the
/// diagonal and range are snapped); anything larger throws DataError naming
/// the file and cell.
ConnectivityMatrix load_matrix_csv(const std::filesystem::path& path);
void save_matrix_csv(const std::filesystem::path& path, const ConnectivityMatrix& g);

/// Manifest: a small text file; '#' comments and blank lines are skipped.
///   n_r 35
///   timepoints 3
///   subject s000 s000_t0.csv s000_t1.csv s000_t2.csv
/// Matrix paths are relative to the manifest's directory. A directory path
/// is taken to mean the manifest.txt inside it.
std::vector<LongitudinalSample> load_dataset(const std::filesystem::path& path);

/// Writes <id>_t<k>.csv per graph plus manifest.txt; returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& dir,
                                   const std::vector<LongitudinalSample>& samples);

} // namespace graphevo
