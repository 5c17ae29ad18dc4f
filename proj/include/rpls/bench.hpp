#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rpls/dataset.hpp"
#include "rpls/selftrain.hpp"

namespace rpls::bench {

inline constexpr int kSchemaVersion = 1;

struct SyntheticSpec {
    std::size_t n_rows = 200;
    std::vector<double> coefficients;
    double intercept = 0.0;
    std::uint64_t seed = 1;
};

struct DatasetSource {
    std::optional<std::filesystem::path> csv;
    std::string label_column = "label";
    std::vector<std::string> features; ///< empty: all non-label columns
    std::optional<std::vector<std::string>> class_levels;
    std::optional<SyntheticSpec> synthetic;
};

struct CriterionEntry {
    std::string label; ///< report name; defaults to the criterion identifier
    selftrain::CriterionConfig config;
};

struct ExperimentConfig {
    DatasetSource dataset;
    double unlabeled_fraction = 0.8;
    double test_fraction = 0.2;
    std::size_t repetitions = 40;
    std::uint64_t base_seed = 1;
    std::vector<CriterionEntry> criteria;
    selftrain::LoopConfig loop; ///< criterion and seed fields are overridden per cell

    void validate() const;
};

/// Throws DataError on schema violations (unknown version, missing fields).
ExperimentConfig config_from_json(const nlohmann::json &j);
nlohmann::json to_json(const ExperimentConfig &config);

Dataset load_dataset(const DatasetSource &source);

struct Cell {
    std::string criterion;
    std::size_t repetition = 0;
    double final_accuracy = 0.0;
    std::vector<double> curve; ///< test accuracy per round, then the final model's
    std::size_t rounds = 0;
    double pseudo_label_error = 0.0;
    bool failed = false;
    std::string error;

    bool operator==(const Cell &) const = default;
};

struct Summary {
    std::string criterion;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;

    bool operator==(const Summary &) const = default;
};

inline constexpr const char *kBaseline = "supervised";

struct BenchReport {
    std::vector<std::string> criteria; ///< in config order, baseline excluded
    std::size_t repetitions = 0;
    std::vector<Cell> cells;    ///< criterion-major, then repetition
    std::vector<Cell> baseline; ///< one per repetition

    /// Mean, sample sd and count over non-failed cells; baseline first.
    std::vector<Summary> summaries() const;
    const Cell &cell(const std::string &criterion, std::size_t repetition) const;

    bool operator==(const BenchReport &) const = default;
};

/// Worker count: RPLS_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/**
 * Repetition r splits with seed base_seed + r; every criterion and the
 * supervised baseline see that split. Failed cells are recorded, not thrown.
 */
BenchReport run_experiment(const ExperimentConfig &config,
                           std::optional<std::size_t> threads = std::nullopt);

enum class Format { csv, csv_curves, markdown, json };

/// Throws DataError for unknown names.
Format format_from_string(const std::string &name);

std::string render(const BenchReport &report, Format format);
/// Throws DataError if the path cannot be written.
void emit_report(const BenchReport &report, Format format, const std::filesystem::path &path);

nlohmann::json to_json(const BenchReport &report);
BenchReport report_from_json(const nlohmann::json &j);

} // namespace rpls::bench
