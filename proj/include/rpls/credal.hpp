#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rpls/criteria.hpp"
#include "rpls/evidence.hpp"

// Finite prior sets: Gamma-maximin, alpha-cut updating and prediction regret.

namespace rpls::credal {

using evidence::PriorSpec;

/// Means at the origin and at center + offset * (1, ..., 1); every mean is
/// paired with every scale. Prior ids run from 1 in that order.
struct PriorLattice {
    std::vector<double> offsets{-1.0, 0.0, 1.0};
    std::vector<double> scales{0.5, 1.0, 2.0, 5.0};
    bool include_origin = true;
};

std::vector<PriorSpec> prior_set(const Eigen::VectorXd &center, const PriorLattice &lattice = {});

/// Indices of priors with log m >= log(alpha) + max log m. Never empty.
std::vector<std::size_t> alpha_cut(std::span<const double> log_evidence, double alpha);

/// Product of the history, floored; 1 for an empty history.
double adaptive_alpha(std::span<const double> history, double floor = 0.01);

/// Gamma-maximin over a table expected[prior][candidate] of log
/// posterior-expected utilities: score = min over priors.
criteria::SelectionResult gamma_maximin(const std::vector<std::vector<double>> &expected);

/**
 * log E_post[p(y = h_i | x_i, theta)] for every prior and candidate, the
 * posterior being prior times the likelihood of D under `spec`.
 */
std::vector<std::vector<double>> expected_utilities(const LabeledView &data_d,
                                                    const PoolView &pool,
                                                    std::span<const int> labels,
                                                    const glm::ModelSpec &spec,
                                                    std::span<const PriorSpec> priors,
                                                    const quad::Setting &setting = {});

/// Data-driven Gamma-maximin using the last model and predicted labels of
/// the tensor. Throws DataError for an empty prior set.
criteria::SelectionResult gamma_maximin(const criteria::UtilityTensor &tensor,
                                        const LabeledView &data_d, const PoolView &pool,
                                        std::span<const PriorSpec> priors,
                                        const quad::Setting &setting = {});

/**
 * Utilities of one candidate a* on a set of parameter states: log u_{j,k}(s)
 * is the log-likelihood of D plus (x*, label j) under model k at state s.
 * Each prior enters through log(quadrature weight * density) per state.
 */
struct RegretProblem {
    std::size_t n_states = 0;
    std::size_t n_models = 0;
    std::size_t n_labels = 0;
    std::vector<double> log_utility; ///< index (s * n_models + k) * n_labels + j
    std::vector<std::vector<double>> log_prior_weights;
    std::size_t used_model = 0;
    std::size_t used_label = 0;

    double at(std::size_t s, std::size_t k, std::size_t j) const {
        return log_utility[(s * n_models + k) * n_labels + j];
    }
    void validate() const;
};

/**
 * Builds the problem on a trapezoid grid covering every prior's +/- 6 sd box
 * in the parameter space of the last (largest) model; smaller models see the
 * coordinate projection of each state. Dimension <= 2.
 */
RegretProblem regret_problem(const LabeledView &data_d, std::span<const double> features,
                             int used_label, const std::vector<glm::ModelSpec> &family,
                             std::size_t used_model, std::span<const PriorSpec> priors,
                             std::size_t grid_points = 41);

/// log m(l_{j,k}, pi) for every prior, model and label: [p][k][j].
std::vector<std::vector<std::vector<double>>> regret_evidence(const RegretProblem &problem);

struct RegretCut {
    std::vector<std::size_t> retained;
    bool fell_back = false; ///< regret rule retained nothing; generic cut used
};

/// pi kept iff m(l_{h,h}, pi) >= alpha * sup over priors, labels and models of m(l_{j,k}, .).
RegretCut regret_alpha_cut(const RegretProblem &problem, double alpha);

struct RegretReport {
    std::vector<double> label_regret; ///< r_l per state
    std::vector<double> model_regret; ///< r_m per state
    std::vector<double> total_regret; ///< r per state
    std::map<std::size_t, double> expected_total; ///< prior -> E_pi r
};

/// Pointwise regrets and their posterior expectations (posterior = prior
/// times u_{h,h}, normalized on the states) for the listed priors.
RegretReport compute_regret(const RegretProblem &problem, std::span<const std::size_t> priors);

struct GuaranteeReport {
    double max_expected_regret = 0.0; ///< over retained priors
    double bound = 1.0;               ///< 1 / alpha
    bool holds = true;
    /// max over retained priors of sup_{j,k} m(l_{j,k}, pi) / m(l_{h,h}, pi)
    double max_evidence_ratio = 1.0;
    bool ratio_holds = true;
    RegretCut cut;
};

GuaranteeReport check_regret_guarantee(const RegretProblem &problem, double alpha);

} // namespace rpls::credal
