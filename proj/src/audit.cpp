#include "rpls/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rpls/error.hpp"
#include "rpls/evidence.hpp"
#include "rpls/glm.hpp"

namespace rpls::audit {

double kendall_tau(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DataError("kendall_tau: length mismatch");
    double concordant = 0.0, discordant = 0.0, ties_a = 0.0, ties_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const double da = a[i] - a[j];
            const double db = b[i] - b[j];
            if (da == 0.0 && db == 0.0)
                continue;
            if (da == 0.0)
                ties_a += 1.0;
            else if (db == 0.0)
                ties_b += 1.0;
            else if ((da > 0.0) == (db > 0.0))
                concordant += 1.0;
            else
                discordant += 1.0;
        }
    const double denom = std::sqrt((concordant + discordant + ties_a) *
                                   (concordant + discordant + ties_b));
    return denom == 0.0 ? 1.0 : (concordant - discordant) / denom;
}

PppComparison ppp_fidelity(std::uint64_t seed) {
    constexpr std::size_t n_labeled = 25;
    constexpr std::size_t n_pool = 10;
    Rng rng(seed);
    const glm::ModelSpec spec{{0}, false, 1};
    evidence::PriorSpec prior{1, Eigen::VectorXd::Zero(1), 10.0};

    for (int attempt = 0; attempt < 100; ++attempt) {
        const double slope = (rng.bernoulli(0.5) ? 1.0 : -1.0) * (0.5 + 1.5 * rng.uniform());
        std::vector<double> x;
        std::vector<std::optional<int>> y;
        for (std::size_t i = 0; i < n_labeled; ++i) {
            x.push_back(rng.normal());
            y.push_back(rng.bernoulli(glm::logistic(slope * x.back())) ? 1 : 0);
        }
        for (std::size_t i = 0; i < n_pool; ++i) {
            x.push_back(1.5 * rng.normal());
            y.push_back(std::nullopt);
        }
        const Dataset data(n_labeled + n_pool, 1, x, y, {"x"}, {"0", "1"});
        LabeledView d{&data, {}, {}};
        for (std::size_t i = 0; i < n_labeled; ++i)
            d.push_back(i, *y[i]);

        glm::ModelFit fit;
        try {
            fit = glm::fit(d, spec);
        } catch (const SeparationError &) {
            continue;
        } catch (const DataError &) {
            continue;
        }
        PppComparison out;
        for (std::size_t c = 0; c < n_pool; ++c) {
            const auto row = data.row(n_labeled + c);
            const auto p = glm::predict_proba(fit, row);
            const int label = p[1] >= p[0] ? 1 : 0;
            out.approx.push_back(evidence::ppp_approx(fit, row, label, c).value);
            out.exact.push_back(evidence::ppp_exact(d, row, label, spec, prior));
        }
        const auto top = [](const std::vector<double> &v) {
            return std::max_element(v.begin(), v.end()) - v.begin();
        };
        out.top1_agree = top(out.approx) == top(out.exact);
        out.tau = kendall_tau(out.approx, out.exact);
        return out;
    }
    throw NumericalError("ppp_fidelity: no non-separated draw in 100 attempts");
}

namespace {

std::size_t between(Rng &rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

std::vector<double> simplex_point(Rng &rng, std::size_t n) {
    std::vector<double> w(n);
    for (auto &v : w)
        v = -std::log(1.0 - rng.uniform()); // exponential draws -> uniform on the simplex
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (auto &v : w)
        v /= total;
    return w;
}

} // namespace

gsd::DominanceInstance random_dominance(Rng &rng, std::size_t max_candidates,
                                        std::size_t max_states, std::size_t max_priors) {
    gsd::DominanceInstance inst;
    inst.n_candidates = between(rng, 2, max_candidates);
    inst.n_states = between(rng, 1, max_states);
    inst.n_dims = between(rng, 1, 3);
    // Values on a coarse lattice so that ties and comparable pairs occur.
    inst.utilities.resize(inst.n_candidates * inst.n_states * inst.n_dims);
    for (auto &u : inst.utilities)
        u = static_cast<double>(rng.below(11)) / 10.0;
    const auto n_priors = between(rng, 1, max_priors);
    for (std::size_t p = 0; p < n_priors; ++p)
        inst.weights.push_back(simplex_point(rng, inst.n_states));
    inst.validate();
    return inst;
}

credal::RegretProblem random_regret(Rng &rng, std::size_t max_states, std::size_t max_priors) {
    const auto n_priors = between(rng, 1, max_priors);
    if (rng.bernoulli(0.5)) {
        credal::RegretProblem p;
        p.n_states = between(rng, 1, max_states);
        p.n_models = between(rng, 1, 3);
        p.n_labels = between(rng, 1, 3);
        p.log_utility.resize(p.n_states * p.n_models * p.n_labels);
        for (auto &u : p.log_utility)
            u = std::log(1.0 - rng.uniform());
        for (std::size_t k = 0; k < n_priors; ++k) {
            auto w = simplex_point(rng, p.n_states);
            for (auto &v : w)
                v = std::log(v);
            p.log_prior_weights.push_back(std::move(w));
        }
        p.used_model = static_cast<std::size_t>(rng.below(p.n_models));
        p.used_label = static_cast<std::size_t>(rng.below(p.n_labels));
        p.validate();
        return p;
    }

    // Logistic family on a small random data set.
    const std::size_t n = between(rng, 6, 20);
    std::vector<double> x;
    std::vector<std::optional<int>> y;
    for (std::size_t i = 0; i <= n; ++i) {
        x.push_back(rng.normal());
        y.push_back(i < n ? std::optional<int>(rng.bernoulli(glm::logistic(x.back())) ? 1 : 0)
                          : std::nullopt);
    }
    const Dataset data(n + 1, 1, x, y, {"x"}, {"0", "1"});
    LabeledView d{&data, {}, {}};
    for (std::size_t i = 0; i < n; ++i)
        d.push_back(i, *y[i]);

    std::vector<glm::ModelSpec> family;
    std::size_t grid = 0;
    switch (rng.below(3)) {
    case 0:
        family = {glm::ModelSpec{{0}, false, 1}};
        grid = between(rng, 5, std::min<std::size_t>(max_states, 41));
        break;
    case 1:
        family = {glm::ModelSpec{{}, true, 1}, glm::ModelSpec{{0}, true, 2}};
        break;
    default:
        family = {glm::ModelSpec{{}, true, 1}, glm::ModelSpec{{0}, false, 2},
                  glm::ModelSpec{{0}, true, 3}};
        break;
    }
    const std::size_t dim = family.back().dim();
    if (dim == 2) {
        grid = 2;
        while ((grid + 1) * (grid + 1) <= max_states)
            ++grid;
    }
    std::vector<evidence::PriorSpec> priors;
    for (std::size_t k = 0; k < n_priors; ++k) {
        Eigen::VectorXd mean(static_cast<Eigen::Index>(dim));
        for (Eigen::Index i = 0; i < mean.size(); ++i)
            mean[i] = rng.normal();
        priors.push_back({static_cast<int>(k + 1), mean, 0.5 + 2.0 * rng.uniform()});
    }
    const auto used_model = static_cast<std::size_t>(rng.below(family.size()));
    const int used_label = static_cast<int>(rng.below(2));
    return credal::regret_problem(d, data.row(n), used_label, family, used_model, priors, grid);
}

} // namespace rpls::audit
