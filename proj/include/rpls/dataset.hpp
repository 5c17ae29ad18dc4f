#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rpls {

/// Row-major feature matrix with optional class labels in {0, ..., J-1}.
class Dataset {
  public:
    Dataset(std::size_t n_rows, std::size_t n_features, std::vector<double> features,
            std::vector<std::optional<int>> labels, std::vector<std::string> feature_names,
            std::vector<std::string> class_names);

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_features() const noexcept { return n_features_; }
    int class_count() const noexcept { return static_cast<int>(class_names_.size()); }

    std::span<const double> row(std::size_t i) const noexcept {
        return {features_.data() + i * n_features_, n_features_};
    }
    double at(std::size_t i, std::size_t j) const noexcept { return features_[i * n_features_ + j]; }

    const std::optional<int> &label(std::size_t i) const noexcept { return labels_[i]; }
    const std::vector<std::optional<int>> &labels() const noexcept { return labels_; }
    const std::vector<std::string> &feature_names() const noexcept { return feature_names_; }
    const std::vector<std::string> &class_names() const noexcept { return class_names_; }

    /// Column index by name; throws DataError if absent.
    std::size_t feature_index(const std::string &name) const;

    /// Copy restricted to the named columns, in the given order.
    Dataset select_features(const std::vector<std::string> &names) const;

    bool operator==(const Dataset &) const = default;

  private:
    std::size_t n_rows_;
    std::size_t n_features_;
    std::vector<double> features_;
    std::vector<std::optional<int>> labels_;
    std::vector<std::string> feature_names_;
    std::vector<std::string> class_names_;
};

/// Reads a comma-separated file with a header row. Non-label columns are
/// features; an empty label cell marks the row unlabeled. Class indices follow
/// `class_levels` when given, otherwise first appearance.
Dataset load_csv(const std::filesystem::path &path, const std::string &label_column,
                 const std::optional<std::vector<std::string>> &class_levels = std::nullopt);

/// Writes features then the label column (named `label_column`), with enough
/// digits that load_csv reproduces every value exactly.
void write_csv(const Dataset &data, const std::filesystem::path &path,
               const std::string &label_column = "label");

/// Standard-normal covariates, Bernoulli labels with
/// P(y = 1) = logistic(intercept + x . coefficients).
Dataset generate_binomial(std::size_t n_rows, std::span<const double> coefficients, double intercept,
                          std::uint64_t seed);

struct SplitState {
    std::vector<std::size_t> labeled_idx;
    std::vector<std::size_t> unlabeled_idx;
    std::vector<std::size_t> test_idx;
    std::uint64_t rng_seed = 0;

    bool operator==(const SplitState &) const = default;
};

/**
 * Partitions the labeled rows into test / labeled / unlabeled.
 *
 * `test_fraction` is taken of all labeled rows (simple random). Of the
 * remaining training rows, `unlabeled_fraction` are masked into the pool
 * (simple random) and the rest form the labeled set, stratified by class so
 * that every class is present. Rows already lacking a label join the pool.
 */
SplitState make_split(const Dataset &data, double unlabeled_fraction, double test_fraction,
                      std::uint64_t seed);

/// Labeled data as seen by a learner: row references plus the labels the
/// learner is allowed to use (true labels for D, predicted ones for
/// pseudo-labeled rows).
struct LabeledView {
    const Dataset *data = nullptr;
    std::vector<std::size_t> rows;
    std::vector<int> labels;

    std::size_t size() const noexcept { return rows.size(); }
    void push_back(std::size_t row, int label) {
        rows.push_back(row);
        labels.push_back(label);
    }
};

/// Unlabeled candidates: features only.
struct PoolView {
    const Dataset *data = nullptr;
    std::vector<std::size_t> rows;

    std::size_t size() const noexcept { return rows.size(); }
    std::span<const double> features(std::size_t k) const noexcept { return data->row(rows[k]); }
};

/// D: labeled_idx with their true labels.
LabeledView training_view(const Dataset &data, const SplitState &split);
/// U: unlabeled_idx, labels withheld.
PoolView pool_view(const Dataset &data, const SplitState &split);
/// Test rows with labels, for evaluation only.
LabeledView test_view(const Dataset &data, const SplitState &split);

} // namespace rpls
