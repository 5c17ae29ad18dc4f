#include "rpls/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rpls/error.hpp"
#include "rpls/evidence.hpp"
#include "rpls/gsd.hpp"
#include "rpls/quadrature.hpp"

namespace rpls::criteria {

UtilityTensor::UtilityTensor(std::size_t candidates, std::size_t models, std::size_t labels)
    : n_candidates(candidates), n_models(models), n_labels(labels),
      values(candidates * models * labels, 0.0), predicted_label(candidates, 0),
      predicted_proba(candidates, std::vector<double>(labels, 1.0 / static_cast<double>(labels))),
      candidate_rows(candidates, 0) {}

void UtilityTensor::validate() const {
    if (values.size() != n_candidates * n_models * n_labels)
        throw DataError("utility tensor: value array has the wrong size");
    if (models.size() != n_models)
        throw DataError("utility tensor: model list does not match n_models");
    if (predicted_label.size() != n_candidates || predicted_proba.size() != n_candidates)
        throw DataError("utility tensor: prediction arrays do not match n_candidates");
    for (double v : values)
        if (!std::isfinite(v))
            throw DataError("utility tensor contains a non-finite entry");
    for (std::size_t i = 0; i < n_candidates; ++i) {
        const auto &p = predicted_proba[i];
        if (p.size() != n_labels)
            throw DataError("utility tensor: probability vector has the wrong arity");
        const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (p[static_cast<std::size_t>(predicted_label[i])] != p[static_cast<std::size_t>(best)])
            throw DataError("utility tensor: predicted label is not the most probable one");
    }
}

SelectionResult rank(std::span<const double> scores, std::string name) {
    SelectionResult out;
    out.criterion_name = std::move(name);
    out.ranked.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        out.ranked.push_back({i, scores[i]});
    std::stable_sort(out.ranked.begin(), out.ranked.end(),
                     [](const ScoredCandidate &a, const ScoredCandidate &b) {
                         return a.score > b.score;
                     });
    if (!out.ranked.empty())
        out.selected = {out.ranked.front().candidate};
    return out;
}

UtilityTensor build_tensor(const LabeledView &data_d, const PoolView &pool,
                           const std::vector<glm::ModelSpec> &family, Backend backend,
                           double ridge) {
    if (family.empty())
        throw DataError("model family is empty");
    std::vector<glm::ModelFit> fits;
    fits.reserve(family.size());
    for (const auto &spec : family) {
        try {
            fits.push_back(glm::fit(data_d, spec, ridge));
        } catch (const std::exception &e) {
            throw DataError("fit of model " + std::to_string(spec.model_id) + " failed: " + e.what());
        }
    }
    return build_tensor(data_d, pool, fits, backend);
}

UtilityTensor build_tensor(const LabeledView &data_d, const PoolView &pool,
                           const std::vector<glm::ModelFit> &fits, Backend backend) {
    if (fits.empty())
        throw DataError("model family is empty");
    UtilityTensor t(pool.size(), fits.size(), 2);
    t.backend = backend;
    t.candidate_rows = pool.rows;
    for (const auto &f : fits)
        t.models.push_back(f.spec);

    const auto &predictor = fits.back();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto p = glm::predict_proba(predictor, pool.features(i));
        t.predicted_proba[i] = {p[0], p[1]};
        t.predicted_label[i] = p[1] > p[0] ? 1 : 0;
    }

    for (std::size_t k = 0; k < fits.size(); ++k) {
        const auto &fit = fits[k];
        if (backend == Backend::ppp_approx) {
            const double base = evidence::ppp_base(fit);
            for (std::size_t i = 0; i < pool.size(); ++i)
                for (int j = 0; j < 2; ++j)
                    t.at(i, k, static_cast<std::size_t>(j)) =
                        base + 2.0 * glm::point_log_lik(fit.spec, fit.theta, pool.features(i), j);
            continue;
        }
        const glm::Design design(data_d, fit.spec);
        glm::FitOptions options;
        options.ridge = fit.ridge;
        options.start = fit.theta;
        for (std::size_t i = 0; i < pool.size(); ++i)
            for (int j = 0; j < 2; ++j) {
                try {
                    t.at(i, k, static_cast<std::size_t>(j)) =
                        glm::fit(design.with_row(pool.features(i), j), fit.spec, options).log_lik;
                } catch (const std::exception &e) {
                    throw DataError("refit of model " + std::to_string(fit.spec.model_id) +
                                    " with candidate " + std::to_string(i) + " failed: " + e.what());
                }
            }
    }
    return t;
}

SelectionResult probability_score(const UtilityTensor &tensor) {
    std::vector<double> scores(tensor.n_candidates);
    for (std::size_t i = 0; i < tensor.n_candidates; ++i)
        scores[i] = *std::max_element(tensor.predicted_proba[i].begin(),
                                      tensor.predicted_proba[i].end());
    return rank(scores, "prob_score");
}

SelectionResult variance(const glm::ModelFit &fit, const PoolView &pool) {
    std::vector<double> scores(pool.size(), 0.0);
    std::vector<bool> excluded(pool.size(), false);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        try {
            scores[i] = -glm::predictive_variance(fit, pool.features(i));
        } catch (const SingularMatrixError &) {
            excluded[i] = true;
        }
    }
    auto out = rank(scores, "variance");
    std::erase_if(out.ranked, [&](const ScoredCandidate &c) { return excluded[c.candidate]; });
    out.selected.clear();
    if (!out.ranked.empty())
        out.selected = {out.ranked.front().candidate};
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (excluded[i])
            out.audit[i]["excluded_singular_information"] = 1.0;
        else
            out.audit[i]["variance"] = -scores[i];
    }
    return out;
}

SelectionResult single_model(const UtilityTensor &tensor, std::optional<std::size_t> model) {
    const auto k = model.value_or(tensor.n_models - 1);
    if (k >= tensor.n_models)
        throw DataError("single_model: model index out of range");
    std::vector<double> scores(tensor.n_candidates);
    for (std::size_t i = 0; i < tensor.n_candidates; ++i)
        scores[i] = tensor.used(i, k);
    return rank(scores, tensor.backend == Backend::ppp_approx ? "ppp" : "likelihood_maxmax");
}

std::vector<double> dimension_weights(const std::vector<glm::ModelSpec> &models) {
    if (models.empty())
        throw DataError("dimension_weights: empty family");
    const double largest = static_cast<double>(models.back().dim());
    std::vector<double> w;
    for (const auto &m : models)
        w.push_back(static_cast<double>(m.dim()) / largest);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto &x : w)
        x /= total;
    return w;
}

namespace {

void check_probability_vector(std::span<const double> w, std::size_t size, const char *what) {
    if (w.size() != size)
        throw DataError(std::string(what) + ": expected " + std::to_string(size) + " entries");
    double total = 0.0;
    for (double x : w) {
        if (!(x >= 0.0 && x <= 1.0))
            throw DataError(std::string(what) + ": entries must lie in [0, 1]");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError(std::string(what) + ": entries must sum to 1");
}

} // namespace

SelectionResult multi_model_weighted(const UtilityTensor &tensor, std::span<const double> weights) {
    check_probability_vector(weights, tensor.n_models, "model weights");
    const auto n = tensor.n_candidates;
    std::vector<double> column(n);
    std::vector<double> terms(n * tensor.n_models, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < tensor.n_models; ++k) {
        if (weights[k] == 0.0)
            continue;
        for (std::size_t i = 0; i < n; ++i)
            column[i] = tensor.used(i, k);
        const double norm = quad::log_sum_exp(column);
        for (std::size_t i = 0; i < n; ++i)
            terms[i * tensor.n_models + k] = std::log(weights[k]) + column[i] - norm;
    }
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i)
        scores[i] = quad::log_sum_exp(
            std::span<const double>(terms.data() + i * tensor.n_models, tensor.n_models));
    auto out = rank(scores, "multi_model_ppp");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < tensor.n_models; ++k)
            if (weights[k] > 0.0)
                out.audit[i]["model_" + std::to_string(tensor.models[k].model_id)] =
                    terms[i * tensor.n_models + k];
    return out;
}

void ThresholdConfig::validate() const {
    if (mode == Mode::quantile && !(tau >= 0.0 && xi <= 1.0))
        throw DataError("quantile thresholds must lie in [0, 1]");
    if (!(xi > tau))
        throw DataError("threshold xi must exceed tau");
}

ThresholdConfig ThresholdConfig::lowered(double decay) const {
    if (!(decay > 0.0 && decay < 1.0))
        throw DataError("threshold decay must lie in (0, 1)");
    ThresholdConfig out = *this;
    if (mode == Mode::quantile) {
        out.tau = tau * decay;
        out.xi = xi * decay;
    } else {
        out.tau = tau - (1.0 - decay) * std::abs(tau);
        out.xi = xi - (1.0 - decay) * std::abs(xi);
    }
    return out;
}

double quantile(std::vector<double> values, double level) {
    if (values.empty())
        throw DataError("quantile of an empty sample");
    if (!(level >= 0.0 && level <= 1.0))
        throw DataError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size())
        return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double phi_threshold(std::span<const double> scores, const ThresholdConfig &thresholds) {
    thresholds.validate();
    bool all_high = true;
    for (double s : scores) {
        if (s < thresholds.tau)
            return 0.0;
        if (s < thresholds.xi)
            all_high = false;
    }
    return all_high ? 1.0 : 0.5;
}

OccamTrace occam_select(const std::vector<std::vector<std::size_t>> &passing,
                        std::size_t n_candidates) {
    if (passing.empty())
        throw DataError("occam_select needs at least one model");
    const auto levels = passing.size();
    OccamTrace out;
    out.levels_survived.assign(n_candidates, 0);
    std::vector<std::size_t> running = passing.back();
    std::sort(running.begin(), running.end());
    if (running.empty())
        throw ThresholdError("no candidate reaches the threshold under the largest model; lower "
                             "the threshold");
    out.last_level = levels - 1;
    for (auto i : running)
        out.levels_survived.at(i) = 1;
    for (std::size_t k = levels - 1; k-- > 0;) {
        std::vector<std::size_t> level = passing[k];
        std::sort(level.begin(), level.end());
        std::vector<std::size_t> next;
        std::set_intersection(running.begin(), running.end(), level.begin(), level.end(),
                              std::back_inserter(next));
        if (next.empty())
            break;
        running = std::move(next);
        out.last_level = k;
        for (auto i : running)
            ++out.levels_survived[i];
    }
    out.selected = std::move(running);
    return out;
}

SelectionResult threshold_occam(const UtilityTensor &tensor, const ThresholdConfig &thresholds) {
    thresholds.validate();
    for (std::size_t k = 0; k + 1 < tensor.n_models; ++k)
        glm::coordinates_in(tensor.models[k], tensor.models[k + 1]);
    std::vector<std::vector<std::size_t>> passing(tensor.n_models);
    std::vector<double> cut(tensor.n_models);
    for (std::size_t k = 0; k < tensor.n_models; ++k) {
        std::vector<double> scores(tensor.n_candidates);
        for (std::size_t i = 0; i < tensor.n_candidates; ++i)
            scores[i] = tensor.used(i, k);
        cut[k] = thresholds.mode == ThresholdConfig::Mode::quantile
                     ? quantile(scores, thresholds.xi)
                     : thresholds.xi;
        for (std::size_t i = 0; i < tensor.n_candidates; ++i)
            if (scores[i] >= cut[k])
                passing[k].push_back(i);
    }
    const auto trace = occam_select(passing, tensor.n_candidates);
    std::vector<double> scores(trace.levels_survived.begin(), trace.levels_survived.end());
    auto out = rank(scores, "occam_threshold");
    out.selected = trace.selected;
    for (std::size_t i = 0; i < tensor.n_candidates; ++i) {
        out.audit[i]["levels_survived"] = static_cast<double>(trace.levels_survived[i]);
        for (std::size_t k = 0; k < tensor.n_models; ++k)
            out.audit[i]["model_" + std::to_string(tensor.models[k].model_id) + "_margin"] =
                tensor.used(i, k) - cut[k];
    }
    return out;
}

SelectionResult multi_label(const UtilityTensor &tensor,
                            const std::vector<std::vector<double>> *weights) {
    const auto &w = weights ? *weights : tensor.predicted_proba;
    if (w.size() != tensor.n_candidates)
        throw DataError("multi_label: one weight vector per candidate required");
    const auto k = tensor.n_models - 1;
    std::vector<double> scores(tensor.n_candidates);
    std::vector<double> terms(tensor.n_labels);
    for (std::size_t i = 0; i < tensor.n_candidates; ++i) {
        check_probability_vector(w[i], tensor.n_labels, "label weights");
        for (std::size_t j = 0; j < tensor.n_labels; ++j)
            terms[j] = w[i][j] > 0.0 ? std::log(w[i][j]) + tensor.at(i, k, j)
                                     : -std::numeric_limits<double>::infinity();
        scores[i] = quad::log_sum_exp(terms);
    }
    return rank(scores, "multi_label");
}

SelectionResult full_bayes(const UtilityTensor &tensor, const std::vector<std::vector<double>> &rho) {
    if (rho.size() != tensor.n_candidates)
        throw DataError("full_bayes: one label distribution per candidate required");
    const auto k = tensor.n_models - 1;
    std::vector<double> scores(tensor.n_candidates);
    std::vector<std::size_t> best(tensor.n_candidates, 0);
    for (std::size_t i = 0; i < tensor.n_candidates; ++i) {
        check_probability_vector(rho[i], tensor.n_labels, "label distribution");
        // Outer expectation over labels of the per-label Bayes value.
        const double shift = tensor.used(i, k);
        double outer = 0.0;
        for (std::size_t j = 0; j < tensor.n_labels; ++j) {
            const double bayes_value = std::exp(tensor.at(i, k, j) - shift);
            outer += rho[i][j] * bayes_value;
            if (tensor.at(i, k, j) > tensor.at(i, k, best[i]))
                best[i] = j;
        }
        scores[i] = shift + std::log(outer);
    }
    auto out = rank(scores, "full_bayes");
    for (std::size_t i = 0; i < tensor.n_candidates; ++i) {
        out.audit[i]["best_label"] = static_cast<double>(best[i]);
        out.audit[i]["best_pair_utility"] = tensor.at(i, k, best[i]);
    }
    return out;
}

SelectionResult multi_data(const UtilityTensor &tensor_d, const UtilityTensor &tensor_dprime,
                           Aggregation aggregation) {
    if (tensor_d.n_candidates != tensor_dprime.n_candidates ||
        tensor_d.candidate_rows != tensor_dprime.candidate_rows)
        throw DataError("multi_data: the two tensors cover different candidates");
    const auto n = tensor_d.n_candidates;
    const auto kd = tensor_d.n_models - 1;
    const auto kp = tensor_dprime.n_models - 1;
    std::vector<double> a(n), b(n), low(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto h = static_cast<std::size_t>(tensor_d.predicted_label[i]);
        a[i] = tensor_d.at(i, kd, h);
        b[i] = tensor_dprime.at(i, kp, h);
        low[i] = std::min(a[i], b[i]);
    }
    SelectionResult out;
    if (aggregation == Aggregation::min) {
        out = rank(low, "multi_data");
    } else {
        std::vector<std::vector<double>> vectors(n);
        for (std::size_t i = 0; i < n; ++i)
            vectors[i] = {a[i], b[i]};
        std::vector<std::size_t> front;
        if (n == 0) {
        } else if (n <= gsd::kMaxCandidates) {
            front = gsd::solution_set_pi(gsd::single_state(vectors), 0).nondominated;
        } else {
            // One state and no margin: the GSD solution set is the Pareto front.
            front = gsd::pareto_front(vectors);
        }
        std::vector<double> flag(n, 0.0);
        for (auto i : front)
            flag[i] = 1.0;
        out.criterion_name = "multi_data";
        for (std::size_t i = 0; i < n; ++i)
            out.ranked.push_back({i, flag[i]});
        std::stable_sort(out.ranked.begin(), out.ranked.end(),
                         [&](const ScoredCandidate &x, const ScoredCandidate &y) {
                             if (x.score != y.score)
                                 return x.score > y.score;
                             return low[x.candidate] > low[y.candidate];
                         });
        out.selected = front;
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.audit[i]["utility_d"] = a[i];
        out.audit[i]["utility_dprime"] = b[i];
        out.audit[i]["min"] = low[i];
    }
    return out;
}

} // namespace rpls::criteria
