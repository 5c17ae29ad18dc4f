#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace rpls::lp {

enum class Status { optimal, infeasible, unbounded };

struct StandardResult {
    Status status = Status::infeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    std::vector<Eigen::Index> basis; ///< basic column per row
    int iterations = 0;
    bool used_bland = false;
};

/**
 * Dense two-phase tableau simplex for
 *   minimize c'x  subject to  A x = b,  x >= 0.
 * Dantzig pricing; switches to Bland's rule after a run of degenerate pivots
 * so the method cannot cycle. Rows that turn out redundant are dropped.
 */
StandardResult solve_standard(const Eigen::MatrixXd &a, const Eigen::VectorXd &b,
                              const Eigen::VectorXd &c);

} // namespace rpls::lp
