#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rpls/dataset.hpp"
#include "rpls/glm.hpp"
#include "rpls/rng.hpp"

namespace testing {

inline rpls::Dataset make_dataset(std::size_t n_features, const std::vector<double> &x,
                                  const std::vector<std::optional<int>> &y) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < n_features; ++j)
        names.push_back("x" + std::to_string(j + 1));
    return rpls::Dataset(y.size(), n_features, x, y, names, {"0", "1"});
}

/// Every labeled row of `data`.
inline rpls::LabeledView all_labeled(const rpls::Dataset &data) {
    rpls::LabeledView view{&data, {}, {}};
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        if (data.label(i))
            view.push_back(i, *data.label(i));
    return view;
}

inline rpls::glm::ModelSpec full_spec(std::size_t n_features, bool intercept = true) {
    rpls::glm::ModelSpec spec;
    spec.intercept = intercept;
    for (std::size_t j = 0; j < n_features; ++j)
        spec.covariates.push_back(j);
    return spec;
}

/// Random logistic data with a moderate signal; regenerated until both classes appear.
inline rpls::Dataset random_logistic(rpls::Rng &rng, std::size_t n, std::size_t p,
                                     double signal = 1.0) {
    if (n < 4)
        throw std::invalid_argument("random_logistic needs n >= 4 for two rows per class");
    for (;;) {
        std::vector<double> x(n * p);
        std::vector<std::optional<int>> y(n);
        std::vector<double> beta(p);
        for (auto &b : beta)
            b = signal * rng.normal();
        const double b0 = 0.3 * rng.normal();
        int ones = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double eta = b0;
            for (std::size_t j = 0; j < p; ++j) {
                x[i * p + j] = rng.normal();
                eta += beta[j] * x[i * p + j];
            }
            y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
            ones += *y[i];
        }
        if (ones >= 2 && ones <= static_cast<int>(n) - 2)
            return make_dataset(p, x, y);
    }
}

struct IrlsResult {
    Eigen::VectorXd beta;
    double log_lik = 0.0;
    bool converged = false;
};

/// Textbook IRLS: beta <- (X'WX)^-1 X'W z with z = eta + (y - mu) / w.
inline IrlsResult irls(const rpls::Dataset &data, const rpls::LabeledView &view,
                       const rpls::glm::ModelSpec &spec) {
    const auto n = static_cast<Eigen::Index>(view.size());
    const auto q = static_cast<Eigen::Index>(spec.dim());
    Eigen::MatrixXd x(n, q);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index c = 0;
        if (spec.intercept)
            x(i, c++) = 1.0;
        for (auto j : spec.covariates)
            x(i, c++) = data.at(view.rows[static_cast<std::size_t>(i)], j);
        y[i] = view.labels[static_cast<std::size_t>(i)];
    }
    IrlsResult out;
    out.beta = Eigen::VectorXd::Zero(q);
    for (int it = 0; it < 200; ++it) {
        const Eigen::VectorXd eta = x * out.beta;
        const Eigen::VectorXd mu = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
        const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
        const Eigen::VectorXd z = eta.array() + (y - mu).array() / w.array();
        const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
        const Eigen::VectorXd next = (xtw * x).ldlt().solve(xtw * z);
        const double change = (next - out.beta).lpNorm<Eigen::Infinity>();
        out.beta = next;
        if (change < 1e-13) {
            out.converged = true;
            break;
        }
    }
    const Eigen::VectorXd eta = x * out.beta;
    for (Eigen::Index i = 0; i < n; ++i) {
        // log p = y*eta - log(1 + e^eta), computed stably.
        const double e = eta[i];
        out.log_lik += y[i] * e - (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e)));
    }
    return out;
}

} // namespace testing
