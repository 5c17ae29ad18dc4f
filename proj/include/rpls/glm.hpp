#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rpls/dataset.hpp"

// Binary logistic regression: the likelihood every selection criterion
// is built from.

namespace rpls::glm {

inline constexpr double kProbClamp = 1e-12;

/// Which feature columns enter the linear predictor, plus an optional intercept.
/// Nested models are expressed by subset inclusion of `covariates`.
struct ModelSpec {
    std::vector<std::size_t> covariates;
    bool intercept = true;
    int model_id = 1;

    std::size_t dim() const noexcept { return covariates.size() + (intercept ? 1 : 0); }
    bool operator==(const ModelSpec &) const = default;
};

/// Throws DataError on duplicate or out-of-range covariates.
void validate(const ModelSpec &spec, std::size_t n_features);

/// Every covariate subset (including the empty one) ordered by size then
/// lexicographically, so the full model comes last. model_id runs 1..2^p.
std::vector<ModelSpec> all_subsets(std::size_t n_features, bool intercept = true);

/// {}, {0}, {0,1}, ... : a chain Theta_1 subset ... subset Theta_K.
std::vector<ModelSpec> nested_chain(std::size_t n_features, bool intercept = true);

/// Positions of `sub`'s parameters inside `full`'s parameter vector.
/// Throws DataError unless sub is nested in full.
std::vector<std::size_t> coordinates_in(const ModelSpec &sub, const ModelSpec &full);

/// Column-major design matrix (intercept column first) and 0/1 response.
class Design {
  public:
    Design(const LabeledView &view, const ModelSpec &spec);
    Design(const Dataset &data, std::span<const std::size_t> rows, std::span<const int> labels,
           const ModelSpec &spec);

    std::size_t n() const noexcept { return n_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> column(std::size_t k) const noexcept { return {x_.data() + k * n_, n_}; }
    std::span<const double> response() const noexcept { return y_; }
    const std::vector<std::string> &column_names() const noexcept { return names_; }

    /// Copy with one extra observation.
    Design with_row(std::span<const double> features, int label) const;

  private:
    Design() = default;
    std::size_t n_ = 0;
    std::size_t dim_ = 0;
    ModelSpec spec_;
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<std::string> names_;
};

struct ModelFit {
    Eigen::VectorXd theta;
    double log_lik = 0.0;
    Eigen::MatrixXd fisher; ///< unpenalized observed information X'WX at theta
    ModelSpec spec;
    bool converged = false;
    std::size_t n_obs = 0;
    std::size_t n_features = 0;
    double ridge = 0.0;
    int iterations = 0;

    /// Converged, or ridge-stabilized (then usable even at the iteration cap).
    bool usable() const noexcept { return converged || ridge > 0.0; }
};

struct FitOptions {
    double ridge = 0.0;
    int max_iterations = 50;
    int max_halvings = 30;
    double tolerance = 1e-8; ///< on the max-norm of the (penalized) gradient
    std::optional<Eigen::VectorXd> start;
};

/**
 * Newton-Raphson with step halving on
 *   l(theta) - ridge/2 * |theta|^2.
 *
 * Throws SeparationError when ridge == 0 and the MLE does not exist,
 * SingularMatrixError naming the collinear columns when X'WX is singular,
 * and DataError when the class preconditions fail.
 */
ModelFit fit(const LabeledView &view, const ModelSpec &spec, double ridge = 0.0);
ModelFit fit(const Design &design, const ModelSpec &spec, const FitOptions &options);

/// sum_i y log p + (1-y) log(1-p) with p clamped to [1e-12, 1-1e-12].
double log_lik_at(const LabeledView &view, const ModelSpec &spec, const Eigen::VectorXd &theta);
double log_lik_at(const Design &design, const Eigen::VectorXd &theta);

/// Gradient of the unpenalized log-likelihood.
Eigen::VectorXd score_at(const Design &design, const Eigen::VectorXd &theta);
/// X' W X with W = diag(p(1-p)).
Eigen::MatrixXd information_at(const Design &design, const Eigen::VectorXd &theta);

/// Intercept (if any) followed by the selected covariates of a full feature row.
Eigen::VectorXd design_row(const ModelSpec &spec, std::span<const double> features);

double linear_predictor(const ModelSpec &spec, const Eigen::VectorXd &theta,
                        std::span<const double> features);

/// Clamped log p(label | x, theta) of one observation.
double point_log_lik(const ModelSpec &spec, const Eigen::VectorXd &theta,
                     std::span<const double> features, int label);

/// (P(y=0), P(y=1)); components clamped into (0, 1). Throws on arity mismatch.
std::array<double, 2> predict_proba(const ModelFit &fit, std::span<const double> features);

/// Delta-method variance z' I^{-1} z of the linear predictor; z includes the
/// intercept term. Throws SingularMatrixError.
double predictive_variance(const Eigen::MatrixXd &fisher, const Eigen::VectorXd &z);
double predictive_variance(const ModelFit &fit, std::span<const double> features);

/// log det of a symmetric positive-definite matrix; throws SingularMatrixError.
double log_det_spd(const Eigen::MatrixXd &matrix);

inline double logistic(double eta) noexcept {
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

/// Objective decrease attributable to rounding; ascent tests tolerate this much.
inline double roundoff_slack(double objective) noexcept {
    return 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(objective));
}

inline double clamp_prob(double p) noexcept {
    return p < kProbClamp ? kProbClamp : (p > 1.0 - kProbClamp ? 1.0 - kProbClamp : p);
}

} // namespace rpls::glm
