#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rpls/glm.hpp"
#include "rpls/quadrature.hpp"

// Marginal likelihoods, pseudo posterior predictive (PPP) scores, and the
// quadrature oracle used to check the closed-form approximation.

namespace rpls::evidence {

/// Isotropic Gaussian prior N(mean, scale^2 I) on a model's parameter vector.
struct PriorSpec {
    int prior_id = 0;
    Eigen::VectorXd mean;
    double scale = 1.0;

    double log_density(const Eigen::VectorXd &theta) const;
    /// Marginal on the listed coordinates (an isotropic Gaussian again).
    PriorSpec project(std::span<const std::size_t> coordinates) const;
};

void validate(const PriorSpec &prior, std::size_t dim);

struct PppScore {
    std::size_t candidate_idx = 0;
    int model_id = 0;
    int label_idx = 0;
    double value = 0.0;
};

struct Evidence {
    int prior_id = 0;
    int model_id = 0;
    double log_marginal = 0.0;

    bool operator==(const Evidence &) const = default;
};

/// A twice-differentiable log-likelihood over R^dim.
class LogLikelihood {
  public:
    virtual ~LogLikelihood() = default;
    virtual std::size_t dim() const = 0;
    virtual double value(const Eigen::VectorXd &theta) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd &theta) const = 0;
    /// Negative Hessian.
    virtual Eigen::MatrixXd information(const Eigen::VectorXd &theta) const = 0;
};

class GlmLikelihood final : public LogLikelihood {
  public:
    explicit GlmLikelihood(const glm::Design &design) : design_(&design) {}
    std::size_t dim() const override { return design_->dim(); }
    double value(const Eigen::VectorXd &theta) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd &theta) const override;
    Eigen::MatrixXd information(const Eigen::VectorXd &theta) const override;

  private:
    const glm::Design *design_;
};

struct Laplace {
    Eigen::VectorXd mode;    ///< MAP estimate
    Eigen::MatrixXd hessian; ///< negative log-posterior Hessian at the mode
    double log_evidence = 0.0;
    int iterations = 0;
};

/**
 * log m ~ l(map) + log prior(map) + q/2 log(2 pi) - 1/2 log|H|.
 * Newton with step halving on the log posterior. Throws NumericalError when
 * the MAP iteration does not converge.
 */
Laplace laplace(const LogLikelihood &likelihood, const PriorSpec &prior,
                const std::optional<Eigen::VectorXd> &start = std::nullopt);

Evidence laplace_evidence(const LabeledView &data, const glm::ModelSpec &spec,
                          const PriorSpec &prior);
Evidence laplace_evidence(const glm::Design &design, const glm::ModelSpec &spec,
                          const PriorSpec &prior);

enum class PppVariant {
    with_candidate, ///< 2 [l_D(theta) + log p(j | x, theta)] - 1/2 log|I|
    data_only,      ///< 2 l_D(theta) - 1/2 log|I|, identical for every candidate
};

/// 2 l_D(theta_hat) - 1/2 log|I(theta_hat)|.
double ppp_base(const glm::ModelFit &fit);

/// Requires a usable fit; throws SingularMatrixError if |I| is not defined.
PppScore ppp_approx(const glm::ModelFit &fit_on_d, std::span<const double> features, int label,
                    std::size_t candidate_idx = 0,
                    PppVariant variant = PppVariant::with_candidate);

/// Nodes covering the bulk of a posterior plus the normalized log weights.
struct Posterior {
    quad::Nodes nodes;
    std::vector<double> log_weights; ///< normalized: log_sum_exp == 0
    double log_evidence = 0.0;       ///< quadrature estimate of log m
};

/**
 * Trapezoid grid (dim <= 2) on the box MAP +/- half_width posterior sd,
 * clipped to the prior's +/- half_width sd box; for dim > 2, importance-
 * weighted Halton draws from the Laplace Gaussian.
 */
Posterior posterior(const LogLikelihood &likelihood, const PriorSpec &prior,
                    const quad::Setting &setting = {});

/// Nodes shared by several likelihoods under one prior (union of their boxes).
quad::Nodes shared_nodes(std::span<const LogLikelihood *const> likelihoods, const PriorSpec &prior,
                         const quad::Setting &setting);

/**
 * log of int p(D u (x, j) | theta) pi(theta) dtheta / int p(D | theta) pi(theta) dtheta
 * by the trapezoid rule on a shared bounded grid. dim <= 2.
 */
double ppp_exact(const LabeledView &data, std::span<const double> features, int label,
                 const glm::ModelSpec &spec, const PriorSpec &prior,
                 const quad::Setting &setting = {});

} // namespace rpls::evidence
