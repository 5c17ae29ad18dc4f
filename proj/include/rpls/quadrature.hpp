#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rpls::quad {

/// Integration nodes: sum_s exp(log_weights[s]) * f(points[s]) approximates
/// the Lebesgue integral of f over the parameter space.
struct Nodes {
    std::vector<Eigen::VectorXd> points;
    std::vector<double> log_weights;

    std::size_t size() const noexcept { return points.size(); }
};

struct Setting {
    std::size_t grid_points = 201; ///< per dimension on tensor grids
    double half_width = 8.0;       ///< box half-width in standard deviations
    std::size_t draws = 1000;      ///< quasi-random draws when dim > 2
};

/// log(sum exp(x)); -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values) noexcept;

/// Trapezoid tensor grid on the box [lower, upper]; dim must be 1 or 2.
Nodes trapezoid_grid(const Eigen::VectorXd &lower, const Eigen::VectorXd &upper,
                     std::size_t points_per_dim);

/// Radical inverse of `index` in `base` (index >= 1 skips the origin).
double halton(std::size_t index, unsigned base) noexcept;

/// Standard-normal quantile.
double normal_quantile(double p);

/**
 * Deterministic Gaussian draws N(mean, cov) from a scrambling-free Halton
 * sequence, weighted by 1 / (n q(theta)) so that the nodes integrate against
 * Lebesgue measure like a grid does (importance sampling with the Gaussian
 * as proposal).
 */
Nodes gaussian_draws(const Eigen::VectorXd &mean, const Eigen::MatrixXd &cov, std::size_t n);

/// Normalized log posterior weights at the nodes given the log integrand
/// (log prior + log likelihood) evaluated there.
std::vector<double> normalize(const Nodes &nodes, std::span<const double> log_integrand);

} // namespace rpls::quad
