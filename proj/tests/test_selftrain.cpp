#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rpls/error.hpp"
#include "rpls/selftrain.hpp"
#include "support.hpp"

using namespace rpls;
using selftrain::Criterion;
using selftrain::LoopConfig;

namespace {

struct Problem {
    Dataset data;
    SplitState split;
};

Problem synthetic(std::uint64_t seed, std::size_t n = 200, double unlabeled = 0.8) {
    const std::vector<double> beta{1.5, -1.0};
    auto data = generate_binomial(n, beta, 0.5, seed);
    auto split = make_split(data, unlabeled, 0.2, seed);
    return {std::move(data), std::move(split)};
}

LoopConfig with(Criterion c) {
    LoopConfig config;
    config.criterion.name = c;
    config.ridge = 1e-6;
    return config;
}

double linear(const std::vector<double> &theta, std::span<const double> x) {
    double eta = theta[0];
    for (std::size_t j = 0; j < x.size(); ++j)
        eta += theta[j + 1] * x[j];
    return eta;
}

} // namespace

TEST_CASE("empty pool gives the supervised fit") {
    const auto pr = synthetic(3, 200, 0.0);
    REQUIRE(pr.split.unlabeled_idx.empty());
    const auto trace = selftrain::run(pr.data, pr.split, with(Criterion::ppp));
    CHECK(trace.rounds.empty());
    CHECK_FALSE(trace.failed_round);
    const auto fit = glm::fit(training_view(pr.data, pr.split), testing::full_spec(2), 1e-6);
    REQUIRE(trace.final_theta.size() == 3);
    for (Eigen::Index j = 0; j < 3; ++j)
        CHECK(trace.final_theta[static_cast<std::size_t>(j)] == fit.theta[j]);
    CHECK(trace.final_test_accuracy == selftrain::accuracy(fit, test_view(pr.data, pr.split)));
}

TEST_CASE("one batch the size of the pool labels everything in one round") {
    const auto pr = synthetic(4);
    auto config = with(Criterion::prob_score);
    config.mode = selftrain::Mode::batch;
    config.batch_size = pr.split.unlabeled_idx.size();
    const auto trace = selftrain::run(pr.data, pr.split, config);
    REQUIRE(trace.rounds.size() == 1);
    auto rows = trace.rounds[0].rows;
    std::sort(rows.begin(), rows.end());
    auto pool = pr.split.unlabeled_idx;
    std::sort(pool.begin(), pool.end());
    CHECK(rows == pool);
}

TEST_CASE("batches of five take ceil(|U| / 5) rounds") {
    const auto pr = synthetic(5);
    auto config = with(Criterion::prob_score);
    config.mode = selftrain::Mode::batch;
    config.batch_size = 5;
    const auto trace = selftrain::run(pr.data, pr.split, config);
    const auto n = pr.split.unlabeled_idx.size();
    CHECK(trace.rounds.size() == (n + 4) / 5);
    for (std::size_t r = 0; r + 1 < trace.rounds.size(); ++r)
        CHECK(trace.rounds[r].rows.size() == 5);
}

TEST_CASE("incremental PPP run: one row per round, finite and reproducible") {
    const auto pr = synthetic(6);
    const auto config = with(Criterion::ppp);
    const auto a = selftrain::run(pr.data, pr.split, config);
    const auto b = selftrain::run(pr.data, pr.split, config);
    CHECK(a == b);
    CHECK(a.rounds.size() == pr.split.unlabeled_idx.size());
    for (const auto &r : a.rounds) {
        CHECK(r.rows.size() == 1);
        CHECK(std::isfinite(r.test_accuracy));
    }
    CHECK(std::isfinite(a.final_test_accuracy));
    CHECK_FALSE(a.failed_round);
}

TEST_CASE("pool conservation and no test leakage") {
    const auto pr = synthetic(7);
    for (auto c : {Criterion::ppp, Criterion::likelihood_maxmax, Criterion::multi_label}) {
        const auto trace = selftrain::run(pr.data, pr.split, with(c));
        const auto total = pr.split.labeled_idx.size() + pr.split.unlabeled_idx.size();
        std::multiset<std::size_t> moved;
        std::size_t previous_labeled = pr.split.labeled_idx.size();
        for (const auto &r : trace.rounds) {
            CHECK(r.n_labeled + r.pool_size == total);
            CHECK(r.n_labeled == previous_labeled);
            previous_labeled += r.rows.size();
            moved.insert(r.rows.begin(), r.rows.end());
        }
        const std::set<std::size_t> pool(pr.split.unlabeled_idx.begin(),
                                         pr.split.unlabeled_idx.end());
        for (auto row : moved) {
            CHECK(moved.count(row) == 1);
            CHECK(pool.count(row) == 1);
        }
        const std::set<std::size_t> test(pr.split.test_idx.begin(), pr.split.test_idx.end());
        for (auto row : moved)
            CHECK(test.count(row) == 0);
    }
}

TEST_CASE("probability score loop picks the most confident remaining row") {
    const auto pr = synthetic(8);
    const auto trace = selftrain::run(pr.data, pr.split, with(Criterion::prob_score));
    std::set<std::size_t> pool(pr.split.unlabeled_idx.begin(), pr.split.unlabeled_idx.end());
    for (const auto &r : trace.rounds) {
        REQUIRE(r.rows.size() == 1);
        double best = 0.0;
        for (auto row : pool)
            best = std::max(best, std::abs(linear(r.theta, pr.data.row(row))));
        const double eta = linear(r.theta, pr.data.row(r.rows[0]));
        CHECK(std::abs(eta) == doctest::Approx(best).epsilon(1e-12));
        CHECK(r.labels[0] == (eta > 0.0 ? 1 : 0));
        pool.erase(r.rows[0]);
    }
    CHECK(pool.empty());
}

TEST_CASE("stopping rules") {
    const auto pr = synthetic(9);
    auto config = with(Criterion::prob_score);
    config.stopping = selftrain::Stopping::max_rounds;
    config.max_rounds = 3;
    CHECK(selftrain::run(pr.data, pr.split, config).rounds.size() == 3);

    config.stopping = selftrain::Stopping::score_floor;
    config.score_floor = 0.97;
    const auto trace = selftrain::run(pr.data, pr.split, config);
    REQUIRE_FALSE(trace.rounds.empty());
    for (std::size_t r = 0; r + 1 < trace.rounds.size(); ++r)
        CHECK(trace.rounds[r].scores.front() >= 0.97);
    if (trace.rounds.size() < pr.split.unlabeled_idx.size())
        CHECK(trace.rounds.back().note == "stopped: best score below floor");
}

TEST_CASE("other criteria run to completion deterministically") {
    const auto pr = synthetic(10, 120);
    for (auto c : {Criterion::variance, Criterion::multi_model_ppp, Criterion::occam_threshold,
                   Criterion::full_bayes, Criterion::multi_data}) {
        auto config = with(c);
        config.mode = selftrain::Mode::batch;
        config.batch_size = 10;
        const auto a = selftrain::run(pr.data, pr.split, config);
        CHECK(a == selftrain::run(pr.data, pr.split, config));
        CHECK(a.criterion == selftrain::to_string(c));
        CHECK_FALSE(a.rounds.empty());
    }
}

TEST_CASE("credal criterion in the loop") {
    const auto pr = synthetic(11, 60, 0.5);
    auto config = with(Criterion::gamma_maximin);
    config.criterion.adaptive_alpha = true;
    config.stopping = selftrain::Stopping::max_rounds;
    config.max_rounds = 2;
    const auto trace = selftrain::run(pr.data, pr.split, config);
    CHECK(trace.rounds.size() == 2);
    CHECK_FALSE(trace.failed_round);
}

TEST_CASE("evaluate: accuracy and pseudo-label error") {
    const auto pr = synthetic(12);
    const auto trace = selftrain::run(pr.data, pr.split, with(Criterion::ppp));
    const auto m = selftrain::evaluate(trace, pr.data, pr.split, 1e-6);
    CHECK(m.rounds == trace.rounds.size());
    CHECK(m.test_accuracy == trace.final_test_accuracy);
    std::size_t wrong = 0, total = 0;
    for (const auto &r : trace.rounds)
        for (std::size_t t = 0; t < r.rows.size(); ++t) {
            wrong += *pr.data.label(r.rows[t]) != r.labels[t] ? 1 : 0;
            ++total;
        }
    CHECK(m.pseudo_label_error == doctest::Approx(static_cast<double>(wrong) / total));
}

TEST_CASE("accuracy of a perfect and a coin-flip classifier") {
    glm::ModelFit fit;
    fit.spec = testing::full_spec(1);
    fit.theta = Eigen::Vector2d(0.0, 3.0);
    fit.converged = true;
    fit.n_features = 1;

    std::vector<double> x;
    std::vector<std::optional<int>> y;
    for (int i = 0; i < 40; ++i) {
        x.push_back(i < 20 ? -0.1 - 0.05 * i : 0.1 + 0.05 * (i - 20));
        y.push_back(i < 20 ? 0 : 1);
    }
    const auto sure = testing::make_dataset(1, x, y);
    CHECK(selftrain::accuracy(fit, testing::all_labeled(sure)) == 1.0);

    Rng rng(13);
    x.clear();
    y.clear();
    for (int i = 0; i < 10000; ++i) {
        x.push_back(rng.normal());
        y.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    const auto coin = testing::make_dataset(1, x, y);
    // 4 standard errors of a binomial proportion at n = 10000
    CHECK(std::abs(selftrain::accuracy(fit, testing::all_labeled(coin)) - 0.5) < 0.02);
}

TEST_CASE("traces round-trip through JSON lines") {
    const auto pr = synthetic(14);
    auto config = with(Criterion::ppp);
    config.stopping = selftrain::Stopping::max_rounds;
    config.max_rounds = 5;
    const auto trace = selftrain::run(pr.data, pr.split, config);
    std::stringstream buffer;
    selftrain::write_jsonl(trace, buffer);
    std::size_t lines = 0;
    for (char ch : buffer.str())
        lines += ch == '\n' ? 1 : 0;
    CHECK(lines == trace.rounds.size() + 1);
    CHECK(selftrain::read_jsonl(buffer) == trace);
}

TEST_CASE("loop configs round-trip through JSON") {
    LoopConfig config = with(Criterion::multi_model_ppp);
    config.mode = selftrain::Mode::batch;
    config.batch_size = 7;
    config.stopping = selftrain::Stopping::score_floor;
    config.score_floor = -3.5;
    config.threshold_decay = 0.25;
    config.seed = 99;
    config.criterion.model_weights = std::vector<double>{0.5, 0.25, 0.25};
    config.criterion.family = selftrain::Family::nested;
    const auto j = selftrain::to_json(config);
    CHECK(selftrain::to_json(selftrain::loop_config_from_json(j)) == j);

    for (auto c : {Criterion::prob_score, Criterion::variance, Criterion::likelihood_maxmax,
                   Criterion::ppp, Criterion::multi_model_ppp, Criterion::occam_threshold,
                   Criterion::multi_label, Criterion::full_bayes, Criterion::multi_data,
                   Criterion::gamma_maximin})
        CHECK(selftrain::criterion_from_string(selftrain::to_string(c)) == c);
    CHECK_THROWS_AS(selftrain::criterion_from_string("oracle"), DataError);
}

TEST_CASE("invalid loop configs are rejected") {
    auto config = with(Criterion::ppp);
    config.mode = selftrain::Mode::batch;
    config.batch_size = 0;
    CHECK_THROWS_AS(config.validate(), DataError);
    config = with(Criterion::ppp);
    config.stopping = selftrain::Stopping::max_rounds;
    config.max_rounds = 0;
    CHECK_THROWS_AS(config.validate(), DataError);
    config = with(Criterion::ppp);
    config.threshold_decay = 1.0;
    CHECK_THROWS_AS(config.validate(), DataError);
}
