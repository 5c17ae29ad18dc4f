#include "rpls/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "rpls/error.hpp"

namespace rpls::quad {

double log_sum_exp(std::span<const double> values) noexcept {
    double top = -std::numeric_limits<double>::infinity();
    for (double v : values)
        top = std::max(top, v);
    if (!std::isfinite(top))
        return top;
    double sum = 0.0;
    for (double v : values)
        sum += std::exp(v - top);
    return top + std::log(sum);
}

Nodes trapezoid_grid(const Eigen::VectorXd &lower, const Eigen::VectorXd &upper,
                     std::size_t points_per_dim) {
    const auto dim = lower.size();
    if (dim < 1 || dim > 2)
        throw DataError("tensor-grid quadrature supports 1 or 2 dimensions, got " +
                        std::to_string(dim));
    if (upper.size() != dim)
        throw DataError("grid bounds differ in dimension");
    if (points_per_dim < 2)
        throw DataError("grid needs at least two points per dimension");
    for (Eigen::Index d = 0; d < dim; ++d)
        if (!(upper[d] > lower[d]))
            throw DataError("grid box is empty");

    const auto m = points_per_dim;
    std::vector<std::vector<double>> axis(static_cast<std::size_t>(dim));
    std::vector<std::vector<double>> axis_log_w(static_cast<std::size_t>(dim));
    for (Eigen::Index d = 0; d < dim; ++d) {
        const double h = (upper[d] - lower[d]) / static_cast<double>(m - 1);
        for (std::size_t t = 0; t < m; ++t) {
            axis[d].push_back(t + 1 == m ? upper[d] : lower[d] + h * static_cast<double>(t));
            const double w = (t == 0 || t + 1 == m) ? 0.5 * h : h;
            axis_log_w[d].push_back(std::log(w));
        }
    }

    Nodes nodes;
    if (dim == 1) {
        for (std::size_t t = 0; t < m; ++t) {
            nodes.points.push_back(Eigen::VectorXd::Constant(1, axis[0][t]));
            nodes.log_weights.push_back(axis_log_w[0][t]);
        }
        return nodes;
    }
    nodes.points.reserve(m * m);
    nodes.log_weights.reserve(m * m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            Eigen::VectorXd p(2);
            p << axis[0][a], axis[1][b];
            nodes.points.push_back(std::move(p));
            nodes.log_weights.push_back(axis_log_w[0][a] + axis_log_w[1][b]);
        }
    return nodes;
}

double halton(std::size_t index, unsigned base) noexcept {
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DataError("normal quantile needs p in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

Nodes gaussian_draws(const Eigen::VectorXd &mean, const Eigen::MatrixXd &cov, std::size_t n) {
    static constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                           41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
    const auto dim = mean.size();
    if (dim > static_cast<Eigen::Index>(std::size(kPrimes)))
        throw DataError("quasi-random draws support at most 24 dimensions");
    if (n == 0)
        throw DataError("need at least one draw");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw SingularMatrixError("draw covariance is not positive definite");
    const Eigen::MatrixXd chol = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index d = 0; d < dim; ++d)
        log_det += 2.0 * std::log(chol(d, d));
    const double log_norm = -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) -
                            0.5 * log_det;

    Nodes nodes;
    nodes.points.reserve(n);
    nodes.log_weights.reserve(n);
    Eigen::VectorXd z(dim);
    for (std::size_t s = 1; s <= n; ++s) {
        for (Eigen::Index d = 0; d < dim; ++d)
            z[d] = normal_quantile(halton(s, kPrimes[d]));
        const double log_q = log_norm - 0.5 * z.squaredNorm();
        nodes.points.push_back(mean + chol * z);
        nodes.log_weights.push_back(-std::log(static_cast<double>(n)) - log_q);
    }
    return nodes;
}

std::vector<double> normalize(const Nodes &nodes, std::span<const double> log_integrand) {
    if (log_integrand.size() != nodes.size())
        throw DataError("integrand length differs from node count");
    std::vector<double> out(nodes.size());
    for (std::size_t s = 0; s < nodes.size(); ++s)
        out[s] = nodes.log_weights[s] + log_integrand[s];
    const double total = log_sum_exp(out);
    if (!std::isfinite(total))
        throw NumericalError("posterior mass vanished on the integration nodes");
    for (auto &v : out)
        v -= total;
    return out;
}

} // namespace rpls::quad
