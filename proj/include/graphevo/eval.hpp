#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "graphevo/training.hpp"

namespace graphevo {

struct EvalRow {
    std::string variant;
    std::size_t timepoint = 0; // 1-based follow-up index
    std::size_t fold = 0;
    double mae = 0.0;
};

struct EvalAggregate {
    std::string variant;
    std::size_t timepoint = 0;
    double mean = 0.0;
    double std_dev = 0.0; // population std across folds
    double best = 0.0;    // minimum fold MAE
};

struct EvalReport {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<EvalRow> rows;

    /// Recomputed from the rows: variants in first-appearance order,
    /// timepoints ascending within each variant.
    std::vector<EvalAggregate> aggregates() const;
};

/// Rolls the cascade in eval mode from each test subject's observed baseline
/// and returns the mean MAE per predicted timepoint. Throws DataError on an
/// empty set or a subject with too few timepoints.
std::vector<double> evaluate_fold(CascadeTrainer& cascade,
                                  const std::vector<LongitudinalSample>& test_samples);

/// Columns variant,timepoint,fold,mae with shortest round-trip numbers.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
/// Rows only; config hash and seed are not part of the CSV.
EvalReport read_report_csv(const std::filesystem::path& path);
void write_report_json(const std::filesystem::path& path, const EvalReport& report);
/// One row per variant; mean ± std and best columns per timepoint.
std::string render_report_table(const EvalReport& report);

} // namespace graphevo
