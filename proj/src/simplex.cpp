#include "rpls/simplex.hpp"

#include <cmath>
#include <limits>

#include "rpls/error.hpp"

namespace rpls::lp {

namespace {

constexpr double kEps = 1e-10;
constexpr int kDegenerateRun = 50;
constexpr int kMaxIterations = 200000;
constexpr double kPerturbation = 1e-7;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Tableau rows 0..m-1 hold constraints with the rhs in the last column; row m
// holds reduced costs with the negated objective value in the last column.
class Tableau {
  public:
    Tableau(RowMatrix t, std::vector<Eigen::Index> basis, Eigen::Index n_structural)
        : t_(std::move(t)), basis_(std::move(basis)), n_(n_structural) {}

    Eigen::Index rows() const { return t_.rows() - 1; }
    Eigen::Index cols() const { return t_.cols() - 1; }
    RowMatrix &data() { return t_; }
    std::vector<Eigen::Index> &basis() { return basis_; }

    void set_costs(const Eigen::VectorXd &cost) {
        const auto m = rows();
        t_.row(m).setZero();
        t_.row(m).head(cost.size()) = cost.transpose();
        for (Eigen::Index r = 0; r < m; ++r) {
            const double cb = basis_[static_cast<std::size_t>(r)] < cost.size()
                                  ? cost[basis_[static_cast<std::size_t>(r)]]
                                  : 0.0;
            if (cb != 0.0)
                t_.row(m) -= cb * t_.row(r);
        }
    }

    void pivot(Eigen::Index row, Eigen::Index col) {
        t_.row(row) /= t_(row, col);
        for (Eigen::Index r = 0; r < t_.rows(); ++r) {
            if (r == row)
                continue;
            const double f = t_(r, col);
            if (f != 0.0)
                t_.row(r) -= f * t_.row(row);
        }
        basis_[static_cast<std::size_t>(row)] = col;
    }

    // Runs to optimality over columns [0, allowed), or until the objective
    // reaches `floor`. Returns false if unbounded.
    bool optimize(Eigen::Index allowed, int &iterations, bool &used_bland,
                  double floor = -std::numeric_limits<double>::infinity()) {
        const auto m = rows();
        int degenerate = 0;
        bool bland = false;
        while (true) {
            if (-t_(m, cols()) <= floor)
                return true;
            if (++iterations > kMaxIterations)
                throw NumericalError("simplex iteration limit reached");
            Eigen::Index enter = -1;
            double best = -kEps;
            for (Eigen::Index j = 0; j < allowed; ++j) {
                const double rc = t_(m, j);
                if (rc < best) {
                    enter = j;
                    if (bland)
                        break;
                    best = rc;
                }
            }
            if (enter < 0)
                return true;
            Eigen::Index leave = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index r = 0; r < m; ++r) {
                const double coef = t_(r, enter);
                if (coef <= kEps)
                    continue;
                const double q = t_(r, cols()) / coef;
                if (q < ratio - kEps || (q < ratio + kEps && lex_less(r, leave, enter))) {
                    ratio = std::min(ratio, q);
                    leave = r;
                }
            }
            if (leave < 0)
                return false;
            if (ratio < kEps) {
                if (++degenerate > kDegenerateRun && !bland) {
                    bland = true;
                    used_bland = true;
                }
            } else {
                degenerate = 0;
            }
            pivot(leave, enter);
        }
    }

    // Dual simplex from a basis with nonnegative reduced costs over [0, allowed).
    // Returns false if the rows admit no feasible point.
    bool restore_feasibility(Eigen::Index allowed, double tolerance, int &iterations) {
        const auto m = rows();
        while (true) {
            Eigen::Index row = -1;
            double worst = -tolerance;
            for (Eigen::Index r = 0; r < m; ++r)
                if (t_(r, cols()) < worst) {
                    worst = t_(r, cols());
                    row = r;
                }
            if (row < 0)
                return true;
            if (++iterations > kMaxIterations)
                throw NumericalError("simplex iteration limit reached");
            Eigen::Index enter = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < allowed; ++j) {
                const double a = t_(row, j);
                if (a < -kEps) {
                    const double q = std::max(0.0, t_(m, j)) / -a;
                    if (q < ratio) {
                        ratio = q;
                        enter = j;
                    }
                }
            }
            if (enter < 0)
                return false;
            pivot(row, enter);
        }
    }

  private:
    // Ties in the ratio test are broken on the rows of B^-1 (the artificial
    // block) scaled by the pivot column; distinct rows never tie exactly, so
    // the leaving choice is unique and degenerate pivots cannot cycle.
    bool lex_less(Eigen::Index r, Eigen::Index other, Eigen::Index enter) const {
        if (other < 0)
            return true;
        const double cr = t_(r, enter);
        const double co = t_(other, enter);
        for (Eigen::Index j = n_; j < cols(); ++j) {
            const double a = t_(r, j) / cr;
            const double b = t_(other, j) / co;
            if (a < b - kEps)
                return true;
            if (a > b + kEps)
                return false;
        }
        return basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(other)];
    }

    RowMatrix t_;
    std::vector<Eigen::Index> basis_;
    Eigen::Index n_;
};

} // namespace

StandardResult solve_standard(const Eigen::MatrixXd &a, const Eigen::VectorXd &b,
                              const Eigen::VectorXd &c) {
    const auto m = a.rows();
    const auto n = a.cols();
    if (b.size() != m || c.size() != n)
        throw DataError("simplex: inconsistent problem dimensions");

    // Columns: n structural, m artificial, rhs.
    RowMatrix t = RowMatrix::Zero(m + 1, n + m + 1);
    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index r = 0; r < m; ++r) {
        const double sign = b[r] < 0.0 ? -1.0 : 1.0;
        t.row(r).head(n) = sign * a.row(r);
        t(r, n + r) = 1.0;
        t(r, n + m) = sign * b[r];
        basis[static_cast<std::size_t>(r)] = n + r;
    }
    Tableau tab(std::move(t), std::move(basis), n);

    StandardResult result;
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
    phase1.tail(m).setOnes();
    tab.set_costs(phase1);
    // phase 1 is bounded below by zero; stop there instead of pivoting on
    const double scale = std::max(1.0, b.lpNorm<1>());
    tab.optimize(n + m, result.iterations, result.used_bland, 1e-12 * scale);
    const double infeasibility = -tab.data()(m, n + m);
    if (infeasibility > 1e-8 * scale) {
        result.status = Status::infeasible;
        return result;
    }

    // Drive artificials out of the basis; drop rows where that is impossible.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < m; ++r) {
        if (tab.basis()[static_cast<std::size_t>(r)] >= n) {
            Eigen::Index col = -1;
            double best = kEps;
            for (Eigen::Index j = 0; j < n; ++j)
                if (std::abs(tab.data()(r, j)) > best) {
                    best = std::abs(tab.data()(r, j));
                    col = j;
                }
            if (col >= 0)
                tab.pivot(r, col);
            else
                continue;
        }
        keep.push_back(r);
    }
    if (static_cast<Eigen::Index>(keep.size()) < m) {
        RowMatrix reduced(static_cast<Eigen::Index>(keep.size()) + 1, n + m + 1);
        std::vector<Eigen::Index> basis;
        for (std::size_t i = 0; i < keep.size(); ++i) {
            reduced.row(static_cast<Eigen::Index>(i)) = tab.data().row(keep[i]);
            basis.push_back(tab.basis()[static_cast<std::size_t>(keep[i])]);
        }
        reduced.row(static_cast<Eigen::Index>(keep.size())).setZero();
        tab = Tableau(std::move(reduced), std::move(basis), n);
    }

    // Phase 2 runs on a slightly perturbed right-hand side: fully degenerate
    // vertices (zero rhs, as in conic duals) otherwise stall the pivoting. The
    // final basis is re-evaluated on the true rhs through the artificial
    // block, which holds B^-1, and repaired with dual simplex steps.
    Eigen::VectorXd signed_b(m);
    for (Eigen::Index r = 0; r < m; ++r)
        signed_b[r] = b[r] < 0.0 ? -b[r] : b[r];
    auto &data = tab.data();
    const auto kept = tab.rows();
    const double bump = kPerturbation * std::max(1.0, b.lpNorm<Eigen::Infinity>());
    for (Eigen::Index r = 0; r < kept; ++r)
        data(r, n + m) += bump * (1.0 + std::fmod(0.6180339887 * static_cast<double>(r), 1.0));

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
    phase2.head(n) = c;
    tab.set_costs(phase2);
    if (!tab.optimize(n, result.iterations, result.used_bland)) {
        result.status = Status::unbounded;
        return result;
    }
    for (Eigen::Index r = 0; r < kept; ++r)
        data(r, n + m) = data.row(r).segment(n, m).dot(signed_b);
    tab.set_costs(phase2);
    if (!tab.restore_feasibility(n, 1e-9 * scale, result.iterations)) {
        result.status = Status::infeasible;
        return result;
    }

    result.status = Status::optimal;
    result.x = Eigen::VectorXd::Zero(n);
    const auto rows = tab.rows();
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto col = tab.basis()[static_cast<std::size_t>(r)];
        if (col < n)
            result.x[col] = std::max(0.0, tab.data()(r, tab.cols()));
    }
    result.basis = tab.basis();
    result.objective = c.dot(result.x);
    return result;
}

} // namespace rpls::lp
