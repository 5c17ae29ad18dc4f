#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rpls/credal.hpp"
#include "rpls/gsd.hpp"
#include "rpls/rng.hpp"

// Randomized instance generators and comparison sweeps shared by the
// `oracle` subcommand and the acceptance suite.

namespace rpls::audit {

/// Kendall tau-b; 1 when both inputs are constant.
double kendall_tau(std::span<const double> a, std::span<const double> b);

struct PppComparison {
    std::vector<double> approx; ///< ppp_approx per candidate (predicted label)
    std::vector<double> exact;  ///< quadrature log posterior predictive
    bool top1_agree = false;
    double tau = 0.0;
};

/**
 * One-parameter logistic problem (slope only, no intercept): 25 labeled rows,
 * 10 pool candidates, prior N(0, 10^2). Each candidate is scored with the
 * label predicted by the ML fit.
 */
PppComparison ppp_fidelity(std::uint64_t seed);

/// <= max_candidates candidates, <= max_states states, <= max_priors priors, 1-3 dims.
gsd::DominanceInstance random_dominance(Rng &rng, std::size_t max_candidates = 6,
                                        std::size_t max_states = 11, std::size_t max_priors = 3);

/**
 * Regret problem with at most 3 models and labels, <= max_states states and
 * <= max_priors priors. A fair coin picks between a logistic family on
 * random data (regret_problem) and a random utility table in (0, 1].
 */
credal::RegretProblem random_regret(Rng &rng, std::size_t max_states = 41,
                                    std::size_t max_priors = 9);

} // namespace rpls::audit
