#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rpls/error.hpp"
#include "rpls/glm.hpp"
#include "support.hpp"

using namespace rpls;
using testing::all_labeled;
using testing::full_spec;
using testing::make_dataset;

namespace {

const double kLnHalf = std::log(0.5);

Dataset symmetric_toy() { return make_dataset(1, {0, 0, 1, 1}, {0, 1, 0, 1}); }

} // namespace

TEST_CASE("symmetric toy: zero coefficients, closed-form information") {
    const auto data = symmetric_toy();
    const auto fit = glm::fit(all_labeled(data), full_spec(1));
    CHECK(fit.converged);
    CHECK(std::abs(fit.theta[0]) < 1e-10);
    CHECK(std::abs(fit.theta[1]) < 1e-10);
    CHECK(fit.log_lik == doctest::Approx(4 * kLnHalf).epsilon(1e-12));
    CHECK(fit.fisher(0, 0) == doctest::Approx(1.0));
    CHECK(fit.fisher(0, 1) == doctest::Approx(0.5));
    CHECK(fit.fisher(1, 0) == doctest::Approx(0.5));
    CHECK(fit.fisher(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("log_lik_at: zero vector, fitted vector, hand sum") {
    Rng rng(3);
    const auto data = testing::random_logistic(rng, 30, 2);
    const auto view = all_labeled(data);
    const auto spec = full_spec(2);
    CHECK(glm::log_lik_at(view, spec, Eigen::VectorXd::Zero(3)) ==
          doctest::Approx(30 * kLnHalf).epsilon(1e-12));
    const auto fit = glm::fit(view, spec);
    CHECK(std::abs(glm::log_lik_at(view, spec, fit.theta) - fit.log_lik) < 1e-10);

    const auto small = testing::random_logistic(rng, 5, 2);
    const auto sview = all_labeled(small);
    Eigen::VectorXd theta(3);
    theta << 0.3, -1.1, 0.7;
    double hand = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        const double eta = theta[0] + theta[1] * small.at(i, 0) + theta[2] * small.at(i, 1);
        const double p = 1.0 / (1.0 + std::exp(-eta));
        hand += *small.label(i) == 1 ? std::log(p) : std::log(1.0 - p);
    }
    CHECK(glm::log_lik_at(sview, spec, theta) == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("predict_proba and predictive_variance closed forms") {
    glm::ModelFit fit;
    fit.spec = full_spec(1);
    fit.theta = Eigen::Vector2d(0.0, 0.0);
    fit.converged = true;
    fit.fisher = Eigen::Matrix2d::Identity();
    const double x1[] = {0.37};
    auto p = glm::predict_proba(fit, x1);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);

    fit.theta = Eigen::Vector2d(0.0, 1.0);
    const double x2[] = {std::log(3.0)};
    p = glm::predict_proba(fit, x2);
    CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-15));

    CHECK(glm::predictive_variance(Eigen::Matrix2d::Identity(), Eigen::Vector2d(1.0, 0.0)) ==
          doctest::Approx(1.0));
    Eigen::Matrix2d info;
    info << 1.0, 0.5, 0.5, 0.5;
    CHECK(glm::predictive_variance(info, Eigen::Vector2d(1.0, 1.0)) == doctest::Approx(2.0));
    CHECK(glm::predictive_variance(info, Eigen::Vector2d(0.0, 0.0)) == 0.0);
}

TEST_CASE("Newton fit matches the IRLS oracle on 20 random datasets") {
    Rng rng(2024);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t p = 1 + rep % 3;
        const auto data = testing::random_logistic(rng, 40 + 5 * rep, p, 0.8);
        const auto view = all_labeled(data);
        const auto spec = full_spec(p);
        const auto fit = glm::fit(view, spec);
        const auto oracle = testing::irls(data, view, spec);
        REQUIRE(oracle.converged);
        CHECK(std::abs(fit.log_lik - oracle.log_lik) < 1e-6);
        CHECK((fit.theta - oracle.beta).lpNorm<Eigen::Infinity>() < 1e-5);
    }
}

TEST_CASE("score and information agree with finite differences at the MLE") {
    Rng rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t p = 1 + rep % 3;
        const auto data = testing::random_logistic(rng, 30 + rep, p, 0.7);
        const auto view = all_labeled(data);
        const auto spec = full_spec(p);
        const glm::Design design(view, spec);
        const auto fit = glm::fit(view, spec);
        const auto q = fit.theta.size();
        const double h = 1e-5;
        const Eigen::VectorXd score = glm::score_at(design, fit.theta);
        const Eigen::MatrixXd info = glm::information_at(design, fit.theta);
        for (Eigen::Index a = 0; a < q; ++a) {
            Eigen::VectorXd tp = fit.theta, tm = fit.theta;
            tp[a] += h;
            tm[a] -= h;
            const double fd = (glm::log_lik_at(design, tp) - glm::log_lik_at(design, tm)) / (2 * h);
            CHECK(std::abs(score[a] - fd) < 1e-5);
            for (Eigen::Index b = 0; b < q; ++b) {
                const double hh = 1e-4;
                auto at = [&](double da, double db) {
                    Eigen::VectorXd t = fit.theta;
                    t[a] += da;
                    t[b] += db;
                    return glm::log_lik_at(design, t);
                };
                const double hess =
                    (at(hh, hh) - at(hh, -hh) - at(-hh, hh) + at(-hh, -hh)) / (4 * hh * hh);
                CHECK(std::abs(-hess - info(a, b)) <= 1e-4 * std::max(1.0, std::abs(info(a, b))));
            }
        }
        CHECK((info - fit.fisher).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("duplicating the data doubles the log-likelihood") {
    Rng rng(5);
    const auto data = testing::random_logistic(rng, 20, 2);
    auto view = all_labeled(data);
    auto doubled = view;
    for (std::size_t k = 0; k < view.size(); ++k)
        doubled.push_back(view.rows[k], view.labels[k]);
    Eigen::VectorXd theta(3);
    theta << -0.2, 0.5, 1.5;
    const auto spec = full_spec(2);
    CHECK(glm::log_lik_at(doubled, spec, theta) ==
          doctest::Approx(2 * glm::log_lik_at(view, spec, theta)).epsilon(1e-13));
}

TEST_CASE("nested models: the larger model never fits worse") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
        const auto data = testing::random_logistic(rng, 50, 3, 0.6);
        const auto view = all_labeled(data);
        const auto chain = glm::nested_chain(3);
        REQUIRE(chain.size() == 4);
        double previous = -INFINITY;
        for (const auto &spec : chain) {
            const auto fit = glm::fit(view, spec);
            CHECK(fit.log_lik >= previous - 1e-9);
            previous = fit.log_lik;
        }
    }
}

TEST_CASE("family enumeration") {
    CHECK(glm::all_subsets(3).size() == 8);
    CHECK(glm::all_subsets(0).size() == 1);
    CHECK(glm::all_subsets(10).size() == 1024);
    CHECK_THROWS_AS(glm::all_subsets(11), DataError);
    const auto chain = glm::nested_chain(2);
    CHECK(chain.back().covariates == std::vector<std::size_t>{0, 1});
    const auto coords = glm::coordinates_in(glm::ModelSpec{{1}, true, 1}, full_spec(2));
    CHECK(coords == std::vector<std::size_t>{0, 2});
}

TEST_CASE("separated data is reported unless a ridge is used") {
    const auto data = make_dataset(1, {-2, -1, -0.5, 0.5, 1, 2}, {0, 0, 0, 1, 1, 1});
    const auto view = all_labeled(data);
    CHECK_THROWS_AS(glm::fit(view, full_spec(1)), SeparationError);
    const auto fit = glm::fit(view, full_spec(1), 1e-2);
    CHECK(fit.usable());
    CHECK(fit.theta[1] > 0);
}

TEST_CASE("collinear covariates are named in the error") {
    const auto data =
        make_dataset(2, {1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12}, {0, 1, 0, 1, 1, 0});
    try {
        (void)glm::fit(all_labeled(data), full_spec(2));
        FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError &e) {
        CHECK(std::string(e.what()).find("x") != std::string::npos);
    }
}

TEST_CASE("fit preconditions") {
    const auto one_class = make_dataset(1, {1, 2, 3}, {1, 1, 1});
    CHECK_THROWS_AS(glm::fit(all_labeled(one_class), full_spec(1)), DataError);
    const auto data = symmetric_toy();
    CHECK_THROWS_AS(glm::fit(all_labeled(data), glm::ModelSpec{{4}, true, 1}), DataError);
    CHECK_THROWS_AS(glm::fit(all_labeled(data), full_spec(1), -1.0), DataError);
}
