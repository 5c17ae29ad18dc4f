#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpls/dataset.hpp"
#include "rpls/glm.hpp"

namespace rpls::criteria {

enum class Backend {
    ppp_approx,     ///< Bayes action: approximate pseudo posterior predictive
    max_likelihood, ///< max-max action: maximized likelihood of D plus the candidate
};

/**
 * Log-scale utilities indexed (candidate i, model k, label j), plus the
 * labels the predictor would assign. Predictions come from the last model of
 * the family (the largest one for nested or all-subset families).
 */
struct UtilityTensor {
    std::size_t n_candidates = 0;
    std::size_t n_models = 0;
    std::size_t n_labels = 0;
    std::vector<double> values;
    std::vector<glm::ModelSpec> models;
    std::vector<int> predicted_label;
    std::vector<std::vector<double>> predicted_proba;
    std::vector<std::size_t> candidate_rows; ///< dataset row of each candidate
    Backend backend = Backend::ppp_approx;

    UtilityTensor() = default;
    UtilityTensor(std::size_t candidates, std::size_t models, std::size_t labels);

    double &at(std::size_t i, std::size_t k, std::size_t j) {
        return values[(i * n_models + k) * n_labels + j];
    }
    double at(std::size_t i, std::size_t k, std::size_t j) const {
        return values[(i * n_models + k) * n_labels + j];
    }
    /// Utility of candidate i with its predicted label under model k.
    double used(std::size_t i, std::size_t k) const {
        return at(i, k, static_cast<std::size_t>(predicted_label[i]));
    }

    /// Throws DataError on shape mismatches, non-finite entries, or
    /// predicted labels that disagree with predicted_proba.
    void validate() const;
};

struct ScoredCandidate {
    std::size_t candidate = 0;
    double score = 0.0;

    bool operator==(const ScoredCandidate &) const = default;
};

struct SelectionResult {
    std::vector<ScoredCandidate> ranked; ///< descending; ties by lowest index
    std::vector<std::size_t> selected;   ///< sorted ascending
    std::string criterion_name;
    std::map<std::size_t, std::map<std::string, double>> audit;

    bool operator==(const SelectionResult &) const = default;
};

/// Ranks scores descending with lowest-index tie-break and selects the top one.
SelectionResult rank(std::span<const double> scores, std::string name);

struct FitFailure {
    int model_id = 0;
    std::string message;
};

/**
 * One fit per model on D, then every (candidate, model, label) utility.
 * Throws DataError naming the model whose fit failed.
 */
UtilityTensor build_tensor(const LabeledView &data_d, const PoolView &pool,
                           const std::vector<glm::ModelSpec> &family, Backend backend,
                           double ridge = 0.0);

/// Same, reusing fits already computed on D (one per family member).
UtilityTensor build_tensor(const LabeledView &data_d, const PoolView &pool,
                           const std::vector<glm::ModelFit> &fits, Backend backend);

SelectionResult probability_score(const UtilityTensor &tensor);

/// Lower delta-method variance ranks higher. Candidates whose variance
/// cannot be computed are left out of `ranked` and noted in the audit.
SelectionResult variance(const glm::ModelFit &fit, const PoolView &pool);

/// score_i = values[i, k, h_i]; k defaults to the last model.
SelectionResult single_model(const UtilityTensor &tensor,
                             std::optional<std::size_t> model = std::nullopt);

/// w_k proportional to dim(Theta_k) / dim(Theta_K), normalized to sum to 1.
std::vector<double> dimension_weights(const std::vector<glm::ModelSpec> &models);

/**
 * score_i = log sum_k w_k softmax_k(i), where softmax_k normalizes model k's
 * used-label utilities across candidates. Audit keeps each model's term.
 * Throws DataError if the weights do not sum to 1 within 1e-9.
 */
SelectionResult multi_model_weighted(const UtilityTensor &tensor, std::span<const double> weights);

struct ThresholdConfig {
    enum class Mode { quantile, absolute };
    Mode mode = Mode::quantile;
    double tau = 0.5;
    double xi = 0.9;

    void validate() const;
    /// Thresholds after one "lower the threshold" retry.
    ThresholdConfig lowered(double decay) const;
};

/// Sample quantile, linear interpolation between order statistics.
double quantile(std::vector<double> values, double level);

/// 0 if some score < tau, 1 if every score >= xi, 0.5 otherwise.
double phi_threshold(std::span<const double> scores, const ThresholdConfig &thresholds);

struct OccamTrace {
    std::vector<std::size_t> selected;
    std::size_t last_level = 0;               ///< smallest k visited (0-based)
    std::vector<std::size_t> levels_survived; ///< per candidate
};

/// Reversed-Occam intersection over the sets S_K, ..., S_1 (given as
/// passing[k] for k = 0..K-1). Throws ThresholdError when S_K is empty.
OccamTrace occam_select(const std::vector<std::vector<std::size_t>> &passing,
                        std::size_t n_candidates);

/// S_k = candidates whose used-label utility under model k reaches xi_k
/// (per-model quantile or absolute), then occam_select.
SelectionResult threshold_occam(const UtilityTensor &tensor, const ThresholdConfig &thresholds);

/// score_i = log sum_j w_ij exp(values[i, K, j]). Default weights are the
/// predicted probabilities.
SelectionResult multi_label(const UtilityTensor &tensor,
                            const std::vector<std::vector<double>> *weights = nullptr);

/// E_rho of the per-label Bayes criterion, evaluated label by label; audit
/// records the best label of each candidate over the (x, y) action space.
SelectionResult full_bayes(const UtilityTensor &tensor, const std::vector<std::vector<double>> &rho);

enum class Aggregation { min, gsd };

/**
 * Bi-objective utility (l_D(i), l_D'(i)) taken from the last model's used
 * label in each tensor. `gsd` ranks GSD-nondominated candidates first.
 */
SelectionResult multi_data(const UtilityTensor &tensor_d, const UtilityTensor &tensor_dprime,
                           Aggregation aggregation);

} // namespace rpls::criteria
