#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rpls/audit.hpp"
#include "rpls/criteria.hpp"
#include "rpls/error.hpp"
#include "rpls/gsd.hpp"
#include "support.hpp"

using namespace rpls;
using criteria::UtilityTensor;

namespace {

/// J = 2, predicted label 0 everywhere; used[i][k] is the predicted-label utility.
UtilityTensor toy(const std::vector<std::vector<double>> &used) {
    const auto n = used.size();
    const auto k = used.front().size();
    UtilityTensor t(n, k, 2);
    for (std::size_t m = 0; m < k; ++m)
        t.models.push_back(glm::ModelSpec{std::vector<std::size_t>(m), true, static_cast<int>(m + 1)});
    for (std::size_t m = 0; m < k; ++m)
        for (std::size_t i = 0; i < n; ++i) {
            t.models[m].covariates.resize(m);
            std::iota(t.models[m].covariates.begin(), t.models[m].covariates.end(), 0);
            t.at(i, m, 0) = used[i][m];
            t.at(i, m, 1) = used[i][m] - 1.0;
        }
    for (std::size_t i = 0; i < n; ++i) {
        t.candidate_rows[i] = i;
        t.predicted_proba[i] = {0.6, 0.4};
    }
    return t;
}

std::vector<std::size_t> order(const criteria::SelectionResult &r) {
    std::vector<std::size_t> out;
    for (const auto &c : r.ranked)
        out.push_back(c.candidate);
    return out;
}

double score_of(const criteria::SelectionResult &r, std::size_t candidate) {
    for (const auto &c : r.ranked)
        if (c.candidate == candidate)
            return c.score;
    FAIL("candidate missing");
    return 0.0;
}

struct Problem {
    Dataset data;
    LabeledView d;
    PoolView pool;
};

Problem synthetic(std::uint64_t seed, std::size_t n, std::size_t p, double unlabeled) {
    std::vector<double> coef(p);
    for (std::size_t j = 0; j < p; ++j)
        coef[j] = j % 2 == 0 ? 1.2 : -0.8;
    auto data = generate_binomial(n, coef, 0.3, seed);
    const auto split = make_split(data, unlabeled, 0.2, seed);
    Problem out{std::move(data), {}, {}};
    out.d = training_view(out.data, split);
    out.pool = pool_view(out.data, split);
    return out;
}

} // namespace

TEST_CASE("rank: descending with lowest-index tie-break") {
    const std::vector<double> s{0.5, 0.9, 0.5, 0.9};
    const auto r = criteria::rank(s, "x");
    CHECK(order(r) == std::vector<std::size_t>{1, 3, 0, 2});
    CHECK(r.selected == std::vector<std::size_t>{1});
}

TEST_CASE("probability score") {
    auto t = toy({{-1.0}, {-1.0}});
    t.predicted_proba = {{0.9, 0.1}, {0.6, 0.4}};
    CHECK(order(criteria::probability_score(t)) == std::vector<std::size_t>{0, 1});
    t.predicted_proba = {{0.5, 0.5}, {0.5, 0.5}};
    CHECK(order(criteria::probability_score(t)) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("probability score picks the most confident prediction on synthetic data") {
    auto pr = synthetic(1, 200, 3, 0.8);
    const auto spec = testing::full_spec(3);
    const auto fit = glm::fit(pr.d, spec, 1e-6);
    const auto t = criteria::build_tensor(pr.d, pr.pool, std::vector<glm::ModelFit>{fit},
                                          criteria::Backend::ppp_approx);
    std::size_t best = 0;
    double margin = -1.0;
    for (std::size_t i = 0; i < pr.pool.size(); ++i) {
        const auto p = glm::predict_proba(fit, pr.pool.features(i));
        if (std::abs(p[1] - 0.5) > margin) {
            margin = std::abs(p[1] - 0.5);
            best = i;
        }
    }
    CHECK(criteria::probability_score(t).selected == std::vector<std::size_t>{best});
}

TEST_CASE("build_tensor shape and finiteness") {
    auto pr = synthetic(1, 200, 3, 0.8);
    PoolView three{pr.pool.data, {pr.pool.rows[0], pr.pool.rows[1], pr.pool.rows[2]}};
    const auto t = criteria::build_tensor(pr.d, three, {testing::full_spec(3)},
                                          criteria::Backend::ppp_approx, 1e-6);
    CHECK(t.n_candidates == 3);
    CHECK(t.n_models == 1);
    CHECK(t.n_labels == 2);
    const auto all = criteria::build_tensor(pr.d, pr.pool, glm::all_subsets(3),
                                            criteria::Backend::ppp_approx, 1e-6);
    CHECK(all.n_models == 8);
    CHECK_NOTHROW(all.validate());
}

TEST_CASE("variance criterion") {
    const auto data = testing::make_dataset(1, {1.0, 0.0, 2.0}, {std::nullopt, std::nullopt, std::nullopt});
    glm::ModelFit fit;
    fit.spec = glm::ModelSpec{{0}, true, 1};
    fit.theta = Eigen::Vector2d::Zero();
    fit.converged = true;
    fit.fisher = Eigen::Matrix2d::Identity();
    const PoolView pool{&data, {0, 1, 2}};
    // z = (1, x): variances 2, 1, 5.
    auto r = criteria::variance(fit, pool);
    CHECK(order(r) == std::vector<std::size_t>{1, 0, 2});
    CHECK(r.audit.at(2).at("variance") == doctest::Approx(5.0));
    fit.fisher << 1.0, 0.5, 0.5, 0.5; // inverse [[2,-2],[-2,4]]: variances 2, 2, 10
    r = criteria::variance(fit, pool);
    CHECK(order(r) == std::vector<std::size_t>{0, 1, 2});
    CHECK(score_of(r, 2) == doctest::Approx(-10.0));
    fit.fisher << 1.0, 1.0, 1.0, 1.0;
    r = criteria::variance(fit, pool);
    CHECK(r.ranked.empty());
    CHECK(r.audit.at(0).count("excluded_singular_information") == 1);
}

TEST_CASE("single model") {
    auto t = toy({{-4.0}, {-5.0}});
    CHECK(order(criteria::single_model(t)) == std::vector<std::size_t>{0, 1});
    CHECK(criteria::single_model(toy({{-3.0}})).selected == std::vector<std::size_t>{0});
    CHECK(criteria::single_model(t).criterion_name == "ppp");
    t.backend = criteria::Backend::max_likelihood;
    CHECK(criteria::single_model(t).criterion_name == "likelihood_maxmax");
}

TEST_CASE("max-likelihood and PPP backends agree on large samples") {
    auto pr = synthetic(3, 500, 2, 0.05);
    pr.pool.rows.resize(10);
    const auto spec = testing::full_spec(2);
    const auto a = criteria::build_tensor(pr.d, pr.pool, {spec}, criteria::Backend::ppp_approx);
    const auto b = criteria::build_tensor(pr.d, pr.pool, {spec}, criteria::Backend::max_likelihood);
    std::vector<double> sa, sb;
    for (std::size_t i = 0; i < a.n_candidates; ++i) {
        sa.push_back(a.used(i, 0));
        sb.push_back(b.used(i, 0));
    }
    CHECK(audit::kendall_tau(sa, sb) == 1.0);
}

TEST_CASE("multi-model weighting") {
    auto single = toy({{-2.0}, {-1.0}, {-3.0}});
    const std::vector<double> one{1.0};
    CHECK(order(criteria::multi_model_weighted(single, one)) ==
          order(criteria::single_model(single)));

    const auto sym = toy({{-1.0, -3.0}, {-3.0, -1.0}});
    const std::vector<double> half{0.5, 0.5};
    const auto r = criteria::multi_model_weighted(sym, half);
    CHECK(r.ranked[0].score == r.ranked[1].score);
    CHECK(order(r) == std::vector<std::size_t>{0, 1});

    // Nested 3-model family: weights by dimension, renormalized.
    const auto t = toy({{-2.0, -1.0, -0.5}, {-1.0, -1.5, -2.0}});
    const auto w = criteria::dimension_weights(t.models);
    CHECK(w[0] == doctest::Approx(1.0 / 6.0));
    CHECK(w[1] == doctest::Approx(1.0 / 3.0));
    CHECK(w[2] == doctest::Approx(0.5));
    const auto mixed = criteria::multi_model_weighted(t, w);
    const double e = std::exp(1.0), s = std::exp(0.5), r15 = std::exp(1.5);
    const double hand0 = std::log(w[0] * 1.0 / (1.0 + e) + w[1] * s / (1.0 + s) + w[2] * r15 / (1.0 + r15));
    const double hand1 = std::log(w[0] * e / (1.0 + e) + w[1] * 1.0 / (1.0 + s) + w[2] * 1.0 / (1.0 + r15));
    CHECK(score_of(mixed, 0) == doctest::Approx(hand0).epsilon(1e-13));
    CHECK(score_of(mixed, 1) == doctest::Approx(hand1).epsilon(1e-13));
    const std::vector<double> bad{0.7, 0.7, -0.4};
    CHECK_THROWS_AS(criteria::multi_model_weighted(t, bad), DataError);
}

TEST_CASE("phi threshold cases") {
    const criteria::ThresholdConfig cfg{criteria::ThresholdConfig::Mode::absolute, 0.5, 0.9};
    CHECK(criteria::phi_threshold(std::vector<double>{0.4, 0.8}, cfg) == 0.0);
    CHECK(criteria::phi_threshold(std::vector<double>{0.6, 0.7}, cfg) == 0.5);
    CHECK(criteria::phi_threshold(std::vector<double>{0.95, 0.92}, cfg) == 1.0);
    const criteria::ThresholdConfig inverted{criteria::ThresholdConfig::Mode::absolute, 0.9, 0.5};
    CHECK_THROWS_AS(criteria::phi_threshold(std::vector<double>{0.1}, inverted), DataError);
}

TEST_CASE("Occam selection traces") {
    // Candidates a = 0, b = 1, c = 2; passing lists ordered from the smallest model.
    auto one = criteria::occam_select({{0, 2}}, 3);
    CHECK(one.selected == std::vector<std::size_t>{0, 2});
    auto two = criteria::occam_select({{1, 2}, {0, 1}}, 3);
    CHECK(two.selected == std::vector<std::size_t>{1});
    auto three = criteria::occam_select({{2}, {0}, {0, 1}}, 3);
    CHECK(three.selected == std::vector<std::size_t>{0});
    CHECK(three.last_level == 1);
    CHECK(three.levels_survived == std::vector<std::size_t>{2, 1, 0});
    CHECK_THROWS_AS(criteria::occam_select({{0}, {}}, 2), ThresholdError);
}

TEST_CASE("threshold_occam: selection lies in every visited level") {
    auto pr = synthetic(5, 150, 3, 0.7);
    const auto t = criteria::build_tensor(pr.d, pr.pool, glm::nested_chain(3),
                                          criteria::Backend::ppp_approx, 1e-6);
    const criteria::ThresholdConfig cfg;
    const auto r = criteria::threshold_occam(t, cfg);
    REQUIRE_FALSE(r.selected.empty());
    const auto top = static_cast<double>(t.n_models);
    for (auto i : r.selected) {
        const auto survived = r.audit.at(i).at("levels_survived");
        for (std::size_t k = t.n_models - static_cast<std::size_t>(survived); k < t.n_models; ++k)
            CHECK(r.audit.at(i).at("model_" + std::to_string(t.models[k].model_id) + "_margin") >= 0.0);
        CHECK(survived <= top);
    }

    auto k1 = toy({{-1.0}, {-2.0}, {-3.0}, {-0.5}});
    const criteria::ThresholdConfig abs_cfg{criteria::ThresholdConfig::Mode::absolute, -3.0, -1.5};
    CHECK(criteria::threshold_occam(k1, abs_cfg).selected == std::vector<std::size_t>{0, 3});

    auto not_nested = toy({{-1.0, -1.0}, {-2.0, -2.0}});
    not_nested.models[0].covariates = {5};
    CHECK_THROWS_AS(criteria::threshold_occam(not_nested, cfg), DataError);
}

TEST_CASE("threshold lowering") {
    const criteria::ThresholdConfig q{};
    const auto lq = q.lowered(0.5);
    CHECK(lq.tau == 0.25);
    CHECK(lq.xi == 0.45);
    const criteria::ThresholdConfig a{criteria::ThresholdConfig::Mode::absolute, -4.0, -2.0};
    const auto la = a.lowered(0.5);
    CHECK(la.tau == -6.0);
    CHECK(la.xi == -3.0);
    CHECK(criteria::quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(criteria::quantile({5, 1, 3}, 1.0) == 5.0);
    CHECK(criteria::quantile({5, 1, 3}, 0.0) == 1.0);
}

TEST_CASE("multi-label weighting") {
    UtilityTensor t(2, 1, 2);
    t.models = {testing::full_spec(0)};
    t.at(0, 0, 0) = -1.0;
    t.at(0, 0, 1) = -1.0;
    t.at(1, 0, 0) = -0.5;
    t.at(1, 0, 1) = -3.0;
    t.predicted_proba = {{0.5, 0.5}, {0.8, 0.2}};
    const std::vector<std::vector<double>> equal{{0.5, 0.5}, {0.5, 0.5}};
    const auto r = criteria::multi_label(t, &equal);
    CHECK(score_of(r, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(score_of(r, 1) == doctest::Approx(std::log(0.5 * std::exp(-0.5) + 0.5 * std::exp(-3.0))));
    CHECK(score_of(r, 1) == doctest::Approx(-1.1143).epsilon(1e-4));
    CHECK(r.selected == std::vector<std::size_t>{0});

    const std::vector<std::vector<double>> one_hot{{1.0, 0.0}, {1.0, 0.0}};
    CHECK(order(criteria::multi_label(t, &one_hot)) == order(criteria::single_model(t)));

    UtilityTensor flat(3, 1, 2);
    flat.models = {testing::full_spec(0)};
    std::fill(flat.values.begin(), flat.values.end(), -2.0);
    const auto tie = criteria::multi_label(flat);
    CHECK(tie.ranked[0].score == tie.ranked[2].score);
    CHECK(order(tie) == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("full Bayes criterion") {
    UtilityTensor t(2, 1, 2);
    t.models = {testing::full_spec(0)};
    t.at(0, 0, 0) = std::log(0.2);
    t.at(0, 0, 1) = std::log(0.5);
    t.at(1, 0, 0) = std::log(0.4);
    t.at(1, 0, 1) = std::log(0.1);
    t.predicted_proba = {{0.3, 0.7}, {0.9, 0.1}};
    t.predicted_label = {1, 0};
    const std::vector<std::vector<double>> rho{{0.3, 0.7}, {0.9, 0.1}};
    const auto r = criteria::full_bayes(t, rho);
    CHECK(score_of(r, 0) == doctest::Approx(std::log(0.3 * 0.2 + 0.7 * 0.5)).epsilon(1e-14));
    CHECK(score_of(r, 1) == doctest::Approx(std::log(0.9 * 0.4 + 0.1 * 0.1)).epsilon(1e-14));
    CHECK(r.audit.at(0).at("best_label") == 1.0);

    const std::vector<std::vector<double>> one_hot{{0.0, 1.0}, {1.0, 0.0}};
    const auto hot = criteria::full_bayes(t, one_hot);
    const auto plain = criteria::single_model(t);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(score_of(hot, i) == doctest::Approx(score_of(plain, i)).epsilon(1e-14));
    CHECK(order(hot) == order(plain));
}

TEST_CASE("multi-data aggregation") {
    auto a = toy({{-1.0}, {-2.0}});
    auto b = toy({{-10.0}, {-2.0}});
    CHECK(order(criteria::multi_data(a, a, criteria::Aggregation::min)) ==
          order(criteria::single_model(a)));
    CHECK(criteria::multi_data(a, b, criteria::Aggregation::min).selected ==
          std::vector<std::size_t>{1});

    auto d = toy({{-1.0}, {-2.0}, {-3.0}});
    auto dp = toy({{-3.0}, {-2.5}, {-4.0}});
    const auto g = criteria::multi_data(d, dp, criteria::Aggregation::gsd);
    // Candidate 2 is pointwise dominated by both others; 0 and 1 are incomparable.
    CHECK(score_of(g, 2) < score_of(g, 0));
    CHECK(score_of(g, 2) < score_of(g, 1));
    CHECK(g.ranked.back().candidate == 2);

    auto other = toy({{-1.0}, {-2.0}, {-3.0}});
    other.candidate_rows = {0, 1, 7};
    CHECK_THROWS_AS(criteria::multi_data(d, other, criteria::Aggregation::min), DataError);
}

TEST_CASE("criteria are deterministic") {
    auto pr = synthetic(2, 120, 2, 0.7);
    const auto t = criteria::build_tensor(pr.d, pr.pool, glm::all_subsets(2),
                                          criteria::Backend::ppp_approx, 1e-6);
    const auto w = criteria::dimension_weights(t.models);
    CHECK(criteria::multi_model_weighted(t, w) == criteria::multi_model_weighted(t, w));
    CHECK(criteria::multi_label(t) == criteria::multi_label(t));
    const auto chain = criteria::build_tensor(pr.d, pr.pool, glm::nested_chain(2),
                                              criteria::Backend::ppp_approx, 1e-6);
    CHECK(criteria::threshold_occam(chain, {}) == criteria::threshold_occam(chain, {}));
}

TEST_CASE("increasing transforms of the utilities preserve single-model rankings") {
    auto pr = synthetic(4, 120, 2, 0.7);
    const auto t = criteria::build_tensor(pr.d, pr.pool, {testing::full_spec(2)},
                                          criteria::Backend::ppp_approx);
    auto affine = t;
    for (auto &v : affine.values)
        v = 3.0 * v + 7.0;
    CHECK(order(criteria::single_model(affine)) == order(criteria::single_model(t)));
    std::vector<double> raw, expd;
    for (std::size_t i = 0; i < t.n_candidates; ++i) {
        raw.push_back(t.used(i, 0));
        expd.push_back(std::exp(t.used(i, 0) / 10.0));
    }
    CHECK(order(criteria::rank(raw, "a")) == order(criteria::rank(expd, "b")));
}

TEST_CASE("weighted-sum argmax lies in the GSD solution set") {
    auto pr = synthetic(6, 100, 3, 0.8);
    pr.pool.rows.resize(12);
    const auto t = criteria::build_tensor(pr.d, pr.pool, glm::nested_chain(3),
                                          criteria::Backend::ppp_approx, 1e-6);
    std::vector<std::vector<double>> vectors(t.n_candidates);
    for (std::size_t i = 0; i < t.n_candidates; ++i)
        for (std::size_t k = 0; k < t.n_models; ++k)
            vectors[i].push_back(t.used(i, k));
    const auto front = gsd::solution_set_pi(gsd::single_state(vectors), 0).nondominated;
    Rng rng(77);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> w(t.n_models);
        for (auto &x : w)
            x = 0.01 + rng.uniform();
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        for (auto &x : w)
            x /= total;
        const auto pick = criteria::multi_model_weighted(t, w).selected.front();
        CHECK(std::find(front.begin(), front.end(), pick) != front.end());
    }
}

TEST_CASE("sub-optimal labels can yield a higher max-max utility") {
    // Witness over random small problems whose pool sits near the fitted
    // decision boundary: labels predicted by a perturbed, lower-likelihood
    // parameter sometimes give a better max-max action. Small D may separate,
    // so fits carry a tiny ridge.
    Rng rng(123);
    const auto spec = testing::full_spec(1);
    int witnesses = 0;
    int instances = 0;
    while (instances < 50) {
        const std::size_t n_d = 4 + static_cast<std::size_t>(rng.below(5));
        const std::size_t n_pool = 1 + static_cast<std::size_t>(rng.below(3));
        const auto train = testing::random_logistic(rng, n_d, 1, 0.5 + 2.0 * rng.uniform());
        const auto fit = glm::fit(testing::all_labeled(train), spec, 1e-6);
        if (std::abs(fit.theta[1]) < 1e-3)
            continue;
        std::vector<double> x;
        std::vector<std::optional<int>> y;
        for (std::size_t i = 0; i < n_d; ++i) {
            x.push_back(train.at(i, 0));
            y.push_back(train.label(i));
        }
        for (std::size_t i = 0; i < n_pool; ++i) {
            x.push_back((0.4 * (rng.uniform() - 0.5) - fit.theta[0]) / fit.theta[1]);
            y.push_back(std::nullopt);
        }
        const auto data = testing::make_dataset(1, x, y);
        const auto d = testing::all_labeled(data);
        const glm::Design design(d, spec);
        glm::ModelFit tilted = fit;
        tilted.theta[0] += rng.normal();
        tilted.theta[1] += rng.normal();
        ++instances;

        glm::FitOptions options;
        options.ridge = 1e-6;
        double best_hat = -INFINITY, best_tilde = -INFINITY;
        for (std::size_t i = n_d; i < n_d + n_pool; ++i) {
            const auto row = data.row(i);
            const auto ph = glm::predict_proba(fit, row);
            const auto pt = glm::predict_proba(tilted, row);
            const int yh = ph[1] > ph[0] ? 1 : 0;
            const int yt = pt[1] > pt[0] ? 1 : 0;
            best_hat = std::max(best_hat, glm::fit(design.with_row(row, yh), spec, options).log_lik);
            best_tilde =
                std::max(best_tilde, glm::fit(design.with_row(row, yt), spec, options).log_lik);
        }
        witnesses += best_tilde > best_hat + 1e-9 ? 1 : 0;
    }
    MESSAGE("witness instances: " << witnesses << " of 50");
    CHECK(witnesses >= 1);
}
