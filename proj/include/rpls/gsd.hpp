#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

// Generalized stochastic dominance for multi-dimensional utilities: a
// preference system over utility vectors, one LP per ordered pair of
// candidates, and the resulting solution sets under one prior or a set.

namespace rpls::gsd {

/// Raw utilities u(a, theta_s) in R^K for every candidate a and state s, and
/// one probability vector over the states per prior.
struct DominanceInstance {
    std::size_t n_candidates = 0;
    std::size_t n_states = 0;
    std::size_t n_dims = 0;
    std::vector<double> utilities; ///< index (a * n_states + s) * n_dims + d
    std::vector<std::vector<double>> weights;

    double utility(std::size_t a, std::size_t s, std::size_t d) const {
        return utilities[(a * n_states + s) * n_dims + d];
    }
    void validate() const;
};

/// One state with weight 1: a deterministic multi-objective comparison.
DominanceInstance single_state(const std::vector<std::vector<double>> &vectors);

/**
 * Distinct utility vectors after per-dimension min-max scaling to [0, 1],
 * plus the componentwise minimum and maximum envelopes. `ordinal` holds the
 * covering edges (upper, lower) of the componentwise order; `cardinal` holds
 * quadruples (v1, v2, v3, v4) with v1 - v2 >= v3 - v4 componentwise.
 */
struct PreferenceSystem {
    std::size_t n_dims = 0;
    std::vector<std::vector<double>> nodes;
    std::vector<std::size_t> node_of; ///< (a * n_states + s) -> node
    std::size_t n_states = 0;
    std::size_t min_node = 0;
    std::size_t max_node = 0;
    std::vector<std::pair<std::size_t, std::size_t>> ordinal;
    std::vector<std::array<std::size_t, 4>> cardinal;
};

/// By default cardinal constraints pair up covering edges only; `full_cardinal`
/// enumerates every quadruple of nodes (for validation on tiny instances).
PreferenceSystem preference_system(const DominanceInstance &instance, bool full_cardinal = false);

/// minimize c'x + constant subject to G x >= h, x free.
struct LinearProgram {
    Eigen::MatrixXd g;
    Eigen::VectorXd h;
    Eigen::VectorXd c;
    double constant = 0.0;
    std::vector<std::size_t> var_node; ///< node represented by each variable
    bool trivially_infeasible = false;
};

/**
 * d_pi(a1, a2) = inf over representations phi of
 *   sum_s p_s [phi(u(a1, s)) - phi(u(a2, s))]
 * with phi(min envelope) = 0, phi(max envelope) = 1, phi monotone with margin
 * xi along covering edges, and phi preserving ordered differences.
 */
LinearProgram build_lp(const PreferenceSystem &system, const DominanceInstance &instance,
                       std::size_t a1, std::size_t a2, std::size_t prior, double xi);

struct LpSolution {
    double value = 0.0;
    std::vector<double> phi; ///< per node, anchors included
    int iterations = 0;
    bool used_bland = false;
};

/// Solved through its dual with the dense simplex. Throws NumericalError
/// (with the problem size) if the program is infeasible or the solver fails.
LpSolution solve_lp(const LinearProgram &program, const PreferenceSystem &system);

/// Largest xi for which the constraints stay feasible.
double max_feasible_margin(const PreferenceSystem &system);

struct Options {
    double xi = 0.0;
    bool full_cardinal = false;
    double tolerance = 1e-9;
};

struct DominanceVerdict {
    std::vector<std::vector<double>> d; ///< d[a1][a2]; d_pi or D = min over priors
    std::vector<std::size_t> nondominated;
    std::vector<std::size_t> priors;    ///< priors the verdict ranges over
    std::vector<std::size_t> intersection; ///< of per-prior solution sets
    bool matches_intersection = true;
};

/// {a : no a' with d(a', a) >= 0 and d(a, a') < 0}, up to the tolerance.
std::vector<std::size_t> nondominated(const std::vector<std::vector<double>> &d, double tolerance);

/// Componentwise Pareto-maximal vectors (equal vectors all kept).
std::vector<std::size_t> pareto_front(const std::vector<std::vector<double>> &vectors);

DominanceVerdict solution_set_pi(const DominanceInstance &instance, std::size_t prior,
                                 const Options &options = {});

struct AlphaReduction {
    std::vector<double> log_evidence; ///< per prior
    double alpha = 1.0;
};

/// D(a1, a2) = min over the (alpha-retained) priors of d_pi(a1, a2).
DominanceVerdict solution_set_Pi(const DominanceInstance &instance,
                                 const std::optional<AlphaReduction> &reduction = std::nullopt,
                                 const Options &options = {});

/// {"utilities": [candidate][state][dim], "weights": [prior][state]}
DominanceInstance instance_from_json(const nlohmann::json &j);
nlohmann::json to_json(const DominanceInstance &instance);
nlohmann::json to_json(const DominanceVerdict &verdict);

inline constexpr std::size_t kMaxCandidates = 25;
inline constexpr std::size_t kMaxStates = 41;

} // namespace rpls::gsd
