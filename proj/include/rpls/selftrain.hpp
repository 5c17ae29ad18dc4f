#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rpls/credal.hpp"
#include "rpls/criteria.hpp"
#include "rpls/dataset.hpp"

namespace rpls::selftrain {

enum class Criterion {
    prob_score,
    variance,
    likelihood_maxmax,
    ppp,
    multi_model_ppp,
    occam_threshold,
    multi_label,
    full_bayes,
    multi_data,
    gamma_maximin,
};

std::string_view to_string(Criterion c) noexcept;
/// Throws DataError for an unknown identifier.
Criterion criterion_from_string(std::string_view name);

enum class Family { full, all_subsets, nested };

struct CriterionConfig {
    Criterion name = Criterion::ppp;
    /// Defaults: all_subsets for multi_model_ppp, nested for occam_threshold,
    /// the full model otherwise.
    std::optional<Family> family;
    std::optional<std::vector<double>> model_weights; ///< multi_model_ppp; default by dimension
    criteria::ThresholdConfig thresholds;             ///< occam_threshold
    criteria::Aggregation aggregation = criteria::Aggregation::min; ///< multi_data

    // gamma_maximin
    enum class AlphaRule { generic, regret };
    double alpha = 1.0;
    bool adaptive_alpha = false;
    AlphaRule alpha_rule = AlphaRule::generic;
    credal::PriorLattice lattice;

    Family resolved_family() const;
};

enum class Mode { incremental, batch };
enum class Stopping { exhaust_pool, max_rounds, score_floor };

struct LoopConfig {
    CriterionConfig criterion;
    Mode mode = Mode::incremental;
    std::size_t batch_size = 1;
    Stopping stopping = Stopping::exhaust_pool;
    std::size_t max_rounds = 1;
    double score_floor = 0.0;
    bool occam_refit = true;
    double threshold_decay = 0.5;
    std::uint64_t seed = 0;
    double ridge = 0.0;

    void validate() const;
};

struct RoundRecord {
    std::size_t round = 0;
    std::vector<std::size_t> rows; ///< dataset rows moved from the pool into D
    std::vector<int> labels;       ///< pseudo-labels assigned to them
    std::vector<double> scores;    ///< criterion score of each selected row
    std::vector<double> theta;     ///< full model fitted on D at the start of the round
    double log_lik = 0.0;
    std::size_t n_labeled = 0; ///< |D| at the start of the round
    std::size_t pool_size = 0; ///< |pool| at the start of the round
    double test_accuracy = 0.0;
    std::string note;

    bool operator==(const RoundRecord &) const = default;
};

struct LoopTrace {
    std::string criterion;
    std::vector<RoundRecord> rounds;
    std::vector<double> final_theta;
    double final_log_lik = 0.0;
    double final_test_accuracy = 0.0;
    std::optional<std::size_t> failed_round;
    std::string failure;

    bool operator==(const LoopTrace &) const = default;
};

/**
 * fit -> predict -> score -> select -> augment until the stopping rule fires.
 * Rows leave the pool once and keep their pseudo-label. A fit failure ends
 * the loop with `failed_round` set; the final model is refit on whatever D
 * has been reached.
 */
LoopTrace run(const Dataset &data, const SplitState &split, const LoopConfig &config);

struct Metrics {
    double test_accuracy = 0.0;
    std::size_t rounds = 0;
    double pseudo_label_error = 0.0; ///< over pseudo-labeled rows; 0 if none
};

/// Refits on D plus the trace's pseudo-labels and scores the test rows.
Metrics evaluate(const LoopTrace &trace, const Dataset &data, const SplitState &split,
                 double ridge = 0.0);

/// Fraction of rows whose most probable class matches the label.
double accuracy(const glm::ModelFit &fit, const LabeledView &rows);

/// One JSON object per round, then a final summary line.
void write_jsonl(const LoopTrace &trace, std::ostream &out);
LoopTrace read_jsonl(std::istream &in);

nlohmann::json to_json(const LoopConfig &config);
LoopConfig loop_config_from_json(const nlohmann::json &j);
nlohmann::json to_json(const CriterionConfig &config);
CriterionConfig criterion_config_from_json(const nlohmann::json &j);

} // namespace rpls::selftrain
