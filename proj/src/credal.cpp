#include "rpls/credal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rpls/error.hpp"

namespace rpls::credal {

std::vector<PriorSpec> prior_set(const Eigen::VectorXd &center, const PriorLattice &lattice) {
    if (lattice.scales.empty())
        throw DataError("prior lattice needs at least one scale");
    std::vector<Eigen::VectorXd> means;
    if (lattice.include_origin)
        means.push_back(Eigen::VectorXd::Zero(center.size()));
    for (double offset : lattice.offsets)
        means.push_back(center.array() + offset);
    std::vector<PriorSpec> out;
    int id = 1;
    for (const auto &mean : means)
        for (double scale : lattice.scales) {
            if (!(scale > 0.0))
                throw DataError("prior scales must be positive");
            out.push_back({id++, mean, scale});
        }
    return out;
}

std::vector<std::size_t> alpha_cut(std::span<const double> log_evidence, double alpha) {
    if (log_evidence.empty())
        throw DataError("alpha_cut: empty prior set");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw DataError("alpha must lie in (0, 1]");
    for (double v : log_evidence)
        if (!std::isfinite(v))
            throw DataError("alpha_cut: non-finite evidence");
    const double top = *std::max_element(log_evidence.begin(), log_evidence.end());
    const double cut = std::log(alpha) + top;
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < log_evidence.size(); ++p)
        if (log_evidence[p] >= cut)
            out.push_back(p);
    return out;
}

double adaptive_alpha(std::span<const double> history, double floor) {
    double log_alpha = 0.0;
    for (double p : history) {
        if (!(p > 0.0 && p <= 1.0))
            throw DataError("adaptive_alpha: probabilities must lie in (0, 1]");
        log_alpha += std::log(p);
    }
    return std::max(floor, std::exp(log_alpha));
}

criteria::SelectionResult gamma_maximin(const std::vector<std::vector<double>> &expected) {
    if (expected.empty())
        throw DataError("gamma_maximin: empty prior set");
    const auto n = expected.front().size();
    std::vector<double> scores(n, std::numeric_limits<double>::infinity());
    for (const auto &row : expected) {
        if (row.size() != n)
            throw DataError("gamma_maximin: ragged expectation table");
        for (std::size_t i = 0; i < n; ++i)
            scores[i] = std::min(scores[i], row[i]);
    }
    auto out = criteria::rank(scores, "gamma_maximin");
    for (std::size_t p = 0; p < expected.size(); ++p)
        for (std::size_t i = 0; i < n; ++i)
            out.audit[i]["prior_" + std::to_string(p)] = expected[p][i];
    return out;
}

std::vector<std::vector<double>> expected_utilities(const LabeledView &data_d,
                                                    const PoolView &pool,
                                                    std::span<const int> labels,
                                                    const glm::ModelSpec &spec,
                                                    std::span<const PriorSpec> priors,
                                                    const quad::Setting &setting) {
    if (labels.size() != pool.size())
        throw DataError("expected_utilities: one label per candidate required");
    const glm::Design design(data_d, spec);
    const evidence::GlmLikelihood likelihood(design);
    std::vector<std::vector<double>> out;
    std::vector<double> terms;
    for (const auto &prior : priors) {
        const auto post = evidence::posterior(likelihood, prior, setting);
        std::vector<double> row(pool.size());
        terms.resize(post.nodes.size());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            for (std::size_t s = 0; s < post.nodes.size(); ++s)
                terms[s] = post.log_weights[s] + glm::point_log_lik(spec, post.nodes.points[s],
                                                                    pool.features(i), labels[i]);
            row[i] = quad::log_sum_exp(terms);
        }
        out.push_back(std::move(row));
    }
    return out;
}

criteria::SelectionResult gamma_maximin(const criteria::UtilityTensor &tensor,
                                        const LabeledView &data_d, const PoolView &pool,
                                        std::span<const PriorSpec> priors,
                                        const quad::Setting &setting) {
    if (priors.empty())
        throw DataError("gamma_maximin: empty prior set");
    return gamma_maximin(expected_utilities(data_d, pool, tensor.predicted_label,
                                            tensor.models.back(), priors, setting));
}

void RegretProblem::validate() const {
    if (n_states == 0 || n_models == 0 || n_labels == 0)
        throw DataError("regret problem needs states, models and labels");
    if (log_utility.size() != n_states * n_models * n_labels)
        throw DataError("regret problem: utility array has the wrong size");
    if (used_model >= n_models || used_label >= n_labels)
        throw DataError("regret problem: used model or label out of range");
    if (log_prior_weights.empty())
        throw DataError("regret problem needs at least one prior");
    for (const auto &w : log_prior_weights)
        if (w.size() != n_states)
            throw DataError("regret problem: prior weight vector length mismatch");
}

RegretProblem regret_problem(const LabeledView &data_d, std::span<const double> features,
                             int used_label, const std::vector<glm::ModelSpec> &family,
                             std::size_t used_model, std::span<const PriorSpec> priors,
                             std::size_t grid_points) {
    if (family.empty() || priors.empty())
        throw DataError("regret_problem needs a model family and priors");
    const auto &full = family.back();
    const auto q = static_cast<Eigen::Index>(full.dim());
    if (q > 2)
        throw DataError("regret_problem evaluates on a tensor grid and supports at most 2 parameters");
    Eigen::VectorXd lower = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::infinity());
    Eigen::VectorXd upper = -lower;
    for (const auto &prior : priors) {
        evidence::validate(prior, full.dim());
        lower = lower.cwiseMin((prior.mean.array() - 6.0 * prior.scale).matrix());
        upper = upper.cwiseMax((prior.mean.array() + 6.0 * prior.scale).matrix());
    }
    const auto nodes = quad::trapezoid_grid(lower, upper, grid_points);

    RegretProblem out;
    out.n_states = nodes.size();
    out.n_models = family.size();
    out.n_labels = 2;
    out.used_model = used_model;
    out.used_label = static_cast<std::size_t>(used_label);
    out.log_utility.resize(out.n_states * out.n_models * out.n_labels);
    for (std::size_t k = 0; k < family.size(); ++k) {
        const auto coords = glm::coordinates_in(family[k], full);
        const glm::Design base(data_d, family[k]);
        for (int j = 0; j < 2; ++j) {
            const auto design = base.with_row(features, j);
            Eigen::VectorXd theta(static_cast<Eigen::Index>(coords.size()));
            for (std::size_t s = 0; s < nodes.size(); ++s) {
                for (std::size_t c = 0; c < coords.size(); ++c)
                    theta[static_cast<Eigen::Index>(c)] =
                        nodes.points[s][static_cast<Eigen::Index>(coords[c])];
                out.log_utility[(s * out.n_models + k) * 2 + static_cast<std::size_t>(j)] =
                    glm::log_lik_at(design, theta);
            }
        }
    }
    for (const auto &prior : priors) {
        std::vector<double> w(nodes.size());
        for (std::size_t s = 0; s < nodes.size(); ++s)
            w[s] = nodes.log_weights[s] + prior.log_density(nodes.points[s]);
        out.log_prior_weights.push_back(std::move(w));
    }
    out.validate();
    return out;
}

std::vector<std::vector<std::vector<double>>> regret_evidence(const RegretProblem &problem) {
    problem.validate();
    std::vector<std::vector<std::vector<double>>> out;
    std::vector<double> terms(problem.n_states);
    for (const auto &w : problem.log_prior_weights) {
        std::vector<std::vector<double>> per_model(problem.n_models,
                                                   std::vector<double>(problem.n_labels));
        for (std::size_t k = 0; k < problem.n_models; ++k)
            for (std::size_t j = 0; j < problem.n_labels; ++j) {
                for (std::size_t s = 0; s < problem.n_states; ++s)
                    terms[s] = w[s] + problem.at(s, k, j);
                per_model[k][j] = quad::log_sum_exp(terms);
            }
        out.push_back(std::move(per_model));
    }
    return out;
}

RegretCut regret_alpha_cut(const RegretProblem &problem, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw DataError("alpha must lie in (0, 1]");
    const auto m = regret_evidence(problem);
    double sup = -std::numeric_limits<double>::infinity();
    for (const auto &per_prior : m)
        for (const auto &per_model : per_prior)
            for (double v : per_model)
                sup = std::max(sup, v);
    const double cut = std::log(alpha) + sup;
    RegretCut out;
    std::vector<double> used(m.size());
    for (std::size_t p = 0; p < m.size(); ++p) {
        used[p] = m[p][problem.used_model][problem.used_label];
        if (used[p] >= cut)
            out.retained.push_back(p);
    }
    if (out.retained.empty()) {
        out.retained = alpha_cut(used, alpha);
        out.fell_back = true;
    }
    return out;
}

RegretReport compute_regret(const RegretProblem &problem, std::span<const std::size_t> priors) {
    problem.validate();
    RegretReport out;
    const auto hm = problem.used_model;
    const auto hl = problem.used_label;
    std::vector<double> log_top(problem.n_states), log_used(problem.n_states);
    for (std::size_t s = 0; s < problem.n_states; ++s) {
        const double used = problem.at(s, hm, hl);
        double label_sup = -std::numeric_limits<double>::infinity();
        double model_sup = label_sup;
        double total_sup = label_sup;
        for (std::size_t k = 0; k < problem.n_models; ++k)
            for (std::size_t j = 0; j < problem.n_labels; ++j) {
                const double u = problem.at(s, k, j);
                total_sup = std::max(total_sup, u);
                if (k == hm)
                    label_sup = std::max(label_sup, u);
                if (j == hl)
                    model_sup = std::max(model_sup, u);
            }
        out.label_regret.push_back(std::exp(label_sup - used));
        out.model_regret.push_back(std::exp(model_sup - used));
        out.total_regret.push_back(std::exp(total_sup - used));
        log_top[s] = total_sup;
        log_used[s] = used;
    }
    std::vector<double> num(problem.n_states), den(problem.n_states);
    for (auto p : priors) {
        if (p >= problem.log_prior_weights.size())
            throw DataError("compute_regret: prior index out of range");
        const auto &w = problem.log_prior_weights[p];
        for (std::size_t s = 0; s < problem.n_states; ++s) {
            num[s] = w[s] + log_top[s];
            den[s] = w[s] + log_used[s];
        }
        out.expected_total[p] = std::exp(quad::log_sum_exp(num) - quad::log_sum_exp(den));
    }
    return out;
}

GuaranteeReport check_regret_guarantee(const RegretProblem &problem, double alpha) {
    GuaranteeReport out;
    out.cut = regret_alpha_cut(problem, alpha);
    out.bound = 1.0 / alpha;
    const auto report = compute_regret(problem, out.cut.retained);
    const auto m = regret_evidence(problem);
    out.max_expected_regret = 0.0;
    out.max_evidence_ratio = 0.0;
    for (auto p : out.cut.retained) {
        out.max_expected_regret = std::max(out.max_expected_regret, report.expected_total.at(p));
        double sup = -std::numeric_limits<double>::infinity();
        for (const auto &per_model : m[p])
            for (double v : per_model)
                sup = std::max(sup, v);
        out.max_evidence_ratio = std::max(
            out.max_evidence_ratio, std::exp(sup - m[p][problem.used_model][problem.used_label]));
    }
    out.holds = out.max_expected_regret <= out.bound + 1e-9;
    out.ratio_holds = out.max_evidence_ratio <= out.bound + 1e-9;
    return out;
}

} // namespace rpls::credal
