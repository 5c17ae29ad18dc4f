#include "rpls/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rpls/error.hpp"

namespace rpls::evidence {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kDrawInflation = 1.5;

} // namespace

double PriorSpec::log_density(const Eigen::VectorXd &theta) const {
    const double q = static_cast<double>(theta.size());
    return -0.5 * (theta - mean).squaredNorm() / (scale * scale) - q * std::log(scale) -
           0.5 * q * kLog2Pi;
}

PriorSpec PriorSpec::project(std::span<const std::size_t> coordinates) const {
    PriorSpec out{prior_id, Eigen::VectorXd(static_cast<Eigen::Index>(coordinates.size())), scale};
    for (std::size_t i = 0; i < coordinates.size(); ++i) {
        if (coordinates[i] >= static_cast<std::size_t>(mean.size()))
            throw DataError("prior projection coordinate out of range");
        out.mean[static_cast<Eigen::Index>(i)] = mean[static_cast<Eigen::Index>(coordinates[i])];
    }
    return out;
}

void validate(const PriorSpec &prior, std::size_t dim) {
    if (!(prior.scale > 0.0) || !std::isfinite(prior.scale))
        throw DataError("prior " + std::to_string(prior.prior_id) + ": scale must be positive");
    if (static_cast<std::size_t>(prior.mean.size()) != dim)
        throw DataError("prior " + std::to_string(prior.prior_id) + ": mean has dimension " +
                        std::to_string(prior.mean.size()) + ", model has " + std::to_string(dim));
}

double GlmLikelihood::value(const Eigen::VectorXd &theta) const {
    return glm::log_lik_at(*design_, theta);
}

Eigen::VectorXd GlmLikelihood::gradient(const Eigen::VectorXd &theta) const {
    return glm::score_at(*design_, theta);
}

Eigen::MatrixXd GlmLikelihood::information(const Eigen::VectorXd &theta) const {
    return glm::information_at(*design_, theta);
}

Laplace laplace(const LogLikelihood &likelihood, const PriorSpec &prior,
                const std::optional<Eigen::VectorXd> &start) {
    const auto q = likelihood.dim();
    validate(prior, q);
    const double precision = 1.0 / (prior.scale * prior.scale);
    const auto n = static_cast<Eigen::Index>(q);

    Eigen::VectorXd theta = start.value_or(prior.mean);
    auto objective = [&](const Eigen::VectorXd &t) {
        return likelihood.value(t) + prior.log_density(t);
    };
    double current = objective(theta);
    int iteration = 0;
    bool converged = false;
    for (; iteration < 100; ++iteration) {
        const Eigen::VectorXd grad = likelihood.gradient(theta) - precision * (theta - prior.mean);
        if (grad.lpNorm<Eigen::Infinity>() < 1e-8) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd h =
            likelihood.information(theta) + precision * Eigen::MatrixXd::Identity(n, n);
        const Eigen::VectorXd step = h.llt().solve(grad);
        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k <= 30; ++k, t *= 0.5) {
            Eigen::VectorXd candidate = theta + t * step;
            const double value = objective(candidate);
            if (std::isfinite(value) && value >= current - glm::roundoff_slack(current)) {
                theta = std::move(candidate);
                current = value;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            converged = grad.lpNorm<Eigen::Infinity>() < 1e-5;
            break;
        }
    }
    if (!converged)
        throw NumericalError("MAP iteration for prior " + std::to_string(prior.prior_id) +
                             " did not converge");

    Laplace out;
    out.mode = theta;
    out.hessian = likelihood.information(theta) + precision * Eigen::MatrixXd::Identity(n, n);
    out.log_evidence = current + 0.5 * static_cast<double>(q) * kLog2Pi -
                       0.5 * glm::log_det_spd(out.hessian);
    out.iterations = iteration;
    return out;
}

Evidence laplace_evidence(const glm::Design &design, const glm::ModelSpec &spec,
                          const PriorSpec &prior) {
    const GlmLikelihood likelihood(design);
    return {prior.prior_id, spec.model_id, laplace(likelihood, prior).log_evidence};
}

Evidence laplace_evidence(const LabeledView &data, const glm::ModelSpec &spec,
                          const PriorSpec &prior) {
    return laplace_evidence(glm::Design(data, spec), spec, prior);
}

double ppp_base(const glm::ModelFit &fit) {
    return 2.0 * fit.log_lik - 0.5 * glm::log_det_spd(fit.fisher);
}

PppScore ppp_approx(const glm::ModelFit &fit_on_d, std::span<const double> features, int label,
                    std::size_t candidate_idx, PppVariant variant) {
    if (!fit_on_d.usable())
        throw NumericalError("PPP needs a converged (or ridge-stabilized) fit");
    double value = ppp_base(fit_on_d);
    if (variant == PppVariant::with_candidate)
        value += 2.0 * glm::point_log_lik(fit_on_d.spec, fit_on_d.theta, features, label);
    return {candidate_idx, fit_on_d.spec.model_id, label, value};
}

quad::Nodes shared_nodes(std::span<const LogLikelihood *const> likelihoods, const PriorSpec &prior,
                         const quad::Setting &setting) {
    if (likelihoods.empty())
        throw DataError("shared_nodes needs at least one likelihood");
    const auto q = static_cast<Eigen::Index>(likelihoods.front()->dim());
    std::vector<Laplace> fits;
    for (const auto *l : likelihoods) {
        if (static_cast<Eigen::Index>(l->dim()) != q)
            throw DataError("shared_nodes: likelihood dimensions differ");
        fits.push_back(laplace(*l, prior));
    }

    if (q > 2) {
        const Eigen::MatrixXd cov = kDrawInflation * kDrawInflation * fits.front().hessian.inverse();
        return quad::gaussian_draws(fits.front().mode, cov, setting.draws);
    }

    const double w = setting.half_width;
    Eigen::VectorXd lower = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::infinity());
    Eigen::VectorXd upper = -lower;
    for (const auto &f : fits) {
        const Eigen::VectorXd sd = f.hessian.inverse().diagonal().cwiseSqrt();
        lower = lower.cwiseMin(f.mode - w * sd);
        upper = upper.cwiseMax(f.mode + w * sd);
    }
    const Eigen::VectorXd prior_lo = prior.mean.array() - w * prior.scale;
    const Eigen::VectorXd prior_hi = prior.mean.array() + w * prior.scale;
    lower = lower.cwiseMax(prior_lo);
    upper = upper.cwiseMin(prior_hi);
    for (Eigen::Index d = 0; d < q; ++d)
        if (!(upper[d] > lower[d])) {
            lower[d] = prior_lo[d];
            upper[d] = prior_hi[d];
        }
    return quad::trapezoid_grid(lower, upper, setting.grid_points);
}

namespace {

std::vector<double> log_integrand(const quad::Nodes &nodes, const LogLikelihood &likelihood,
                                  const PriorSpec &prior) {
    std::vector<double> out(nodes.size());
    for (std::size_t s = 0; s < nodes.size(); ++s)
        out[s] = likelihood.value(nodes.points[s]) + prior.log_density(nodes.points[s]);
    return out;
}

double log_integral(const quad::Nodes &nodes, std::span<const double> integrand) {
    std::vector<double> terms(nodes.size());
    for (std::size_t s = 0; s < nodes.size(); ++s)
        terms[s] = nodes.log_weights[s] + integrand[s];
    return quad::log_sum_exp(terms);
}

} // namespace

Posterior posterior(const LogLikelihood &likelihood, const PriorSpec &prior,
                    const quad::Setting &setting) {
    const LogLikelihood *one[] = {&likelihood};
    Posterior out;
    out.nodes = shared_nodes(one, prior, setting);
    const auto integrand = log_integrand(out.nodes, likelihood, prior);
    out.log_evidence = log_integral(out.nodes, integrand);
    out.log_weights = quad::normalize(out.nodes, integrand);
    return out;
}

double ppp_exact(const LabeledView &data, std::span<const double> features, int label,
                 const glm::ModelSpec &spec, const PriorSpec &prior, const quad::Setting &setting) {
    if (spec.dim() > 2)
        throw DataError("ppp_exact uses tensor-grid quadrature and supports at most 2 parameters");
    validate(prior, spec.dim());
    const glm::Design base(data, spec);
    const glm::Design augmented = base.with_row(features, label);
    const GlmLikelihood l0(base);
    const GlmLikelihood l1(augmented);
    const LogLikelihood *both[] = {&l0, &l1};
    const auto nodes = shared_nodes(both, prior, setting);
    return log_integral(nodes, log_integrand(nodes, l1, prior)) -
           log_integral(nodes, log_integrand(nodes, l0, prior));
}

} // namespace rpls::evidence
