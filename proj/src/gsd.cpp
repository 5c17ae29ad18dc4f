#include "rpls/gsd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>

#include "rpls/credal.hpp"
#include "rpls/error.hpp"
#include "rpls/simplex.hpp"

namespace rpls::gsd {

void DominanceInstance::validate() const {
    if (n_candidates == 0 || n_states == 0 || n_dims == 0)
        throw DataError("dominance instance needs candidates, states and dimensions");
    if (utilities.size() != n_candidates * n_states * n_dims)
        throw DataError("dominance instance: utility array has the wrong size");
    for (double u : utilities)
        if (!std::isfinite(u))
            throw DataError("dominance instance: non-finite utility");
    if (weights.empty())
        throw DataError("dominance instance needs at least one prior");
    for (std::size_t p = 0; p < weights.size(); ++p) {
        if (weights[p].size() != n_states)
            throw DataError("prior " + std::to_string(p) + ": weight vector length mismatch");
        double sum = 0.0;
        for (double w : weights[p]) {
            if (!(w >= 0.0))
                throw DataError("prior " + std::to_string(p) + ": negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw DataError("prior " + std::to_string(p) + ": weights do not sum to 1");
    }
}

DominanceInstance single_state(const std::vector<std::vector<double>> &vectors) {
    if (vectors.empty())
        throw DataError("single_state needs at least one vector");
    DominanceInstance out;
    out.n_candidates = vectors.size();
    out.n_states = 1;
    out.n_dims = vectors.front().size();
    for (const auto &v : vectors) {
        if (v.size() != out.n_dims)
            throw DataError("single_state: vectors differ in dimension");
        out.utilities.insert(out.utilities.end(), v.begin(), v.end());
    }
    out.weights = {{1.0}};
    return out;
}

namespace {

bool dominates(const std::vector<double> &v, const std::vector<double> &w) {
    bool strict = false;
    for (std::size_t d = 0; d < v.size(); ++d) {
        if (v[d] < w[d])
            return false;
        if (v[d] > w[d])
            strict = true;
    }
    return strict;
}

bool differences_ordered(const std::vector<double> &v1, const std::vector<double> &v2,
                         const std::vector<double> &v3, const std::vector<double> &v4) {
    for (std::size_t d = 0; d < v1.size(); ++d)
        if ((v1[d] - v2[d]) < (v3[d] - v4[d]) - 1e-12)
            return false;
    return true;
}

using Bits = std::vector<std::uint64_t>;

bool intersects(const Bits &a, const Bits &b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] & b[i])
            return true;
    return false;
}

} // namespace

PreferenceSystem preference_system(const DominanceInstance &instance, bool full_cardinal) {
    instance.validate();
    const auto k = instance.n_dims;
    std::vector<double> lo(k, INFINITY), hi(k, -INFINITY);
    for (std::size_t a = 0; a < instance.n_candidates; ++a)
        for (std::size_t s = 0; s < instance.n_states; ++s)
            for (std::size_t d = 0; d < k; ++d) {
                lo[d] = std::min(lo[d], instance.utility(a, s, d));
                hi[d] = std::max(hi[d], instance.utility(a, s, d));
            }

    PreferenceSystem sys;
    sys.n_dims = k;
    sys.n_states = instance.n_states;
    std::map<std::vector<double>, std::size_t> index;
    auto intern = [&](std::vector<double> v) {
        auto [it, inserted] = index.emplace(v, sys.nodes.size());
        if (inserted)
            sys.nodes.push_back(std::move(v));
        return it->second;
    };
    for (std::size_t a = 0; a < instance.n_candidates; ++a)
        for (std::size_t s = 0; s < instance.n_states; ++s) {
            std::vector<double> v(k);
            for (std::size_t d = 0; d < k; ++d)
                v[d] = hi[d] > lo[d] ? (instance.utility(a, s, d) - lo[d]) / (hi[d] - lo[d]) : 0.0;
            sys.node_of.push_back(intern(std::move(v)));
        }
    std::vector<double> top(k);
    for (std::size_t d = 0; d < k; ++d)
        top[d] = hi[d] > lo[d] ? 1.0 : 0.0;
    sys.min_node = intern(std::vector<double>(k, 0.0));
    sys.max_node = intern(top);

    const auto n = sys.nodes.size();
    const auto words = (n + 63) / 64;
    std::vector<Bits> below(n, Bits(words, 0)), above(n, Bits(words, 0));
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t w = 0; w < n; ++w)
            if (dominates(sys.nodes[v], sys.nodes[w])) {
                below[v][w / 64] |= std::uint64_t{1} << (w % 64);
                above[w][v / 64] |= std::uint64_t{1} << (v % 64);
            }
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t w = 0; w < n; ++w)
            if ((below[v][w / 64] >> (w % 64)) & 1U)
                if (!intersects(below[v], above[w]))
                    sys.ordinal.emplace_back(v, w);

    if (!full_cardinal) {
        for (std::size_t e = 0; e < sys.ordinal.size(); ++e)
            for (std::size_t f = 0; f < sys.ordinal.size(); ++f) {
                if (e == f)
                    continue;
                const auto [v1, v2] = sys.ordinal[e];
                const auto [v3, v4] = sys.ordinal[f];
                if (differences_ordered(sys.nodes[v1], sys.nodes[v2], sys.nodes[v3], sys.nodes[v4]))
                    sys.cardinal.push_back({v1, v2, v3, v4});
            }
        return sys;
    }
    if (n > 16)
        throw DataError("full cardinal enumeration is limited to 16 utility vectors");
    for (std::size_t v1 = 0; v1 < n; ++v1)
        for (std::size_t v2 = 0; v2 < n; ++v2)
            for (std::size_t v3 = 0; v3 < n; ++v3)
                for (std::size_t v4 = 0; v4 < n; ++v4) {
                    if ((v1 == v3 && v2 == v4) || (v1 == v2 && v3 == v4))
                        continue;
                    if (differences_ordered(sys.nodes[v1], sys.nodes[v2], sys.nodes[v3],
                                            sys.nodes[v4]))
                        sys.cardinal.push_back({v1, v2, v3, v4});
                }
    return sys;
}

namespace {

// Rows over the free node values; anchors substituted (min -> 0, max -> 1).
struct ConstraintBuilder {
    const PreferenceSystem &sys;
    std::vector<long> var_of;
    std::size_t n_vars = 0;
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    bool infeasible = false;

    explicit ConstraintBuilder(const PreferenceSystem &s, std::size_t extra = 0) : sys(s) {
        var_of.assign(sys.nodes.size(), -1);
        for (std::size_t v = 0; v < sys.nodes.size(); ++v)
            if (v != sys.min_node && v != sys.max_node)
                var_of[v] = static_cast<long>(n_vars++);
        width = n_vars + extra;
    }

    std::size_t width = 0;

    // sum coef * phi(node) (+ margin_coef * extra variable) >= bound
    void add(std::initializer_list<std::pair<std::size_t, double>> terms, double bound,
             double margin_coef = 0.0) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
        for (auto [node, coef] : terms) {
            if (node == sys.max_node)
                bound -= coef;
            else if (node != sys.min_node)
                row[var_of[node]] += coef;
        }
        if (margin_coef != 0.0)
            row[static_cast<Eigen::Index>(n_vars)] += margin_coef;
        if (width == 0 || row.cwiseAbs().maxCoeff() == 0.0) {
            if (bound > 1e-12)
                infeasible = true;
            return;
        }
        rows.push_back(std::move(row));
        rhs.push_back(bound);
    }

    void add_system(double xi, bool margin_variable) {
        for (auto [u, l] : sys.ordinal)
            add({{u, 1.0}, {l, -1.0}}, margin_variable ? 0.0 : xi, margin_variable ? -1.0 : 0.0);
        for (const auto &q : sys.cardinal)
            add({{q[0], 1.0}, {q[1], -1.0}, {q[2], -1.0}, {q[3], 1.0}}, 0.0);
    }

    void fill(LinearProgram &lp) const {
        lp.g.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
        lp.h.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            lp.g.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
            lp.h[static_cast<Eigen::Index>(r)] = rhs[r];
        }
        lp.trivially_infeasible = infeasible;
        lp.var_node.assign(n_vars, 0);
        for (std::size_t v = 0; v < var_of.size(); ++v)
            if (var_of[v] >= 0)
                lp.var_node[static_cast<std::size_t>(var_of[v])] = v;
    }
};

} // namespace

LinearProgram build_lp(const PreferenceSystem &system, const DominanceInstance &instance,
                       std::size_t a1, std::size_t a2, std::size_t prior, double xi) {
    if (a1 >= instance.n_candidates || a2 >= instance.n_candidates)
        throw DataError("build_lp: candidate index out of range");
    if (prior >= instance.weights.size())
        throw DataError("build_lp: prior index out of range");
    if (!(xi >= 0.0 && xi <= 1.0))
        throw DataError("build_lp: xi must lie in [0, 1]");

    ConstraintBuilder builder(system);
    builder.add_system(xi, false);
    LinearProgram lp;
    builder.fill(lp);
    lp.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(builder.n_vars));
    const auto &p = instance.weights[prior];
    auto accumulate = [&](std::size_t a, double sign) {
        for (std::size_t s = 0; s < instance.n_states; ++s) {
            const auto node = system.node_of[a * instance.n_states + s];
            if (node == system.max_node)
                lp.constant += sign * p[s];
            else if (node != system.min_node)
                lp.c[builder.var_of[node]] += sign * p[s];
        }
    };
    accumulate(a1, 1.0);
    accumulate(a2, -1.0);
    return lp;
}

namespace {

std::string describe(const LinearProgram &lp) {
    std::ostringstream out;
    out << lp.g.cols() << " variables, " << lp.g.rows() << " constraints";
    return out.str();
}

} // namespace

LpSolution solve_lp(const LinearProgram &program, const PreferenceSystem &system) {
    if (program.trivially_infeasible)
        throw NumericalError("dominance LP is infeasible (" + describe(program) + ")");
    LpSolution out;
    out.phi.assign(system.nodes.size(), 0.0);
    out.phi[system.max_node] = 1.0;
    const auto n_vars = program.g.cols();
    if (n_vars == 0) {
        out.value = program.constant;
        return out;
    }
    // Dual: max h'y s.t. G'y = c, y >= 0.
    const auto res = lp::solve_standard(program.g.transpose(), program.c, -program.h);
    if (res.status == lp::Status::unbounded)
        throw NumericalError("dominance LP is infeasible (" + describe(program) +
                             "); xi exceeds the feasible margin");
    if (res.status != lp::Status::optimal)
        throw NumericalError("dominance LP solve failed (" + describe(program) + ")");
    out.value = -res.objective + program.constant;
    out.iterations = res.iterations;
    out.used_bland = res.used_bland;

    // Certificate: the basic rows hold with equality.
    std::vector<Eigen::Index> rows;
    for (auto col : res.basis)
        if (col < program.g.rows())
            rows.push_back(col);
    Eigen::MatrixXd gb(static_cast<Eigen::Index>(rows.size()), n_vars);
    Eigen::VectorXd hb(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        gb.row(static_cast<Eigen::Index>(r)) = program.g.row(rows[r]);
        hb[static_cast<Eigen::Index>(r)] = program.h[rows[r]];
    }
    const Eigen::VectorXd x = gb.colPivHouseholderQr().solve(hb);
    for (Eigen::Index v = 0; v < n_vars; ++v)
        if (v < static_cast<Eigen::Index>(program.var_node.size()))
            out.phi[program.var_node[static_cast<std::size_t>(v)]] = x[v];
    return out;
}

double max_feasible_margin(const PreferenceSystem &system) {
    if (system.min_node == system.max_node)
        return 0.0;
    ConstraintBuilder builder(system, 1);
    builder.add_system(0.0, true);
    builder.add({}, 0.0, 1.0); // margin >= 0
    LinearProgram lp;
    builder.fill(lp);
    lp.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(builder.width));
    lp.c[static_cast<Eigen::Index>(builder.n_vars)] = -1.0;
    const auto res = lp::solve_standard(lp.g.transpose(), lp.c, -lp.h);
    if (res.status != lp::Status::optimal)
        throw NumericalError("margin LP failed (" + describe(lp) + ")");
    return res.objective;
}

std::vector<std::size_t> nondominated(const std::vector<std::vector<double>> &d, double tolerance) {
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < d.size(); ++a) {
        bool dominated = false;
        for (std::size_t b = 0; b < d.size() && !dominated; ++b)
            dominated = b != a && d[b][a] >= -tolerance && d[a][b] < -tolerance;
        if (!dominated)
            out.push_back(a);
    }
    return out;
}

std::vector<std::size_t> pareto_front(const std::vector<std::vector<double>> &vectors) {
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < vectors.size(); ++a) {
        bool dominated = false;
        for (std::size_t b = 0; b < vectors.size() && !dominated; ++b)
            dominated = dominates(vectors[b], vectors[a]);
        if (!dominated)
            out.push_back(a);
    }
    return out;
}

namespace {

void check_scale(const DominanceInstance &instance) {
    instance.validate();
    if (instance.n_candidates > kMaxCandidates || instance.n_states > kMaxStates)
        throw DataError("dominance instance exceeds " + std::to_string(kMaxCandidates) +
                        " candidates or " + std::to_string(kMaxStates) + " states");
}

std::vector<std::vector<double>> pairwise(const PreferenceSystem &sys,
                                          const DominanceInstance &instance, std::size_t prior,
                                          double xi) {
    const auto n = instance.n_candidates;
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b)
                d[a][b] = solve_lp(build_lp(sys, instance, a, b, prior, xi), sys).value;
    return d;
}

void check_margin(const PreferenceSystem &sys, double xi) {
    if (xi > 0.0) {
        const double bound = max_feasible_margin(sys);
        if (xi > bound + 1e-12)
            throw DataError("xi = " + std::to_string(xi) +
                            " exceeds the largest feasible margin " + std::to_string(bound));
    }
}

} // namespace

DominanceVerdict solution_set_pi(const DominanceInstance &instance, std::size_t prior,
                                 const Options &options) {
    check_scale(instance);
    if (prior >= instance.weights.size())
        throw DataError("solution_set_pi: prior index out of range");
    const auto sys = preference_system(instance, options.full_cardinal);
    check_margin(sys, options.xi);
    DominanceVerdict out;
    out.d = pairwise(sys, instance, prior, options.xi);
    out.nondominated = nondominated(out.d, options.tolerance);
    out.priors = {prior};
    out.intersection = out.nondominated;
    return out;
}

DominanceVerdict solution_set_Pi(const DominanceInstance &instance,
                                 const std::optional<AlphaReduction> &reduction,
                                 const Options &options) {
    check_scale(instance);
    DominanceVerdict out;
    if (reduction) {
        if (reduction->log_evidence.size() != instance.weights.size())
            throw DataError("alpha reduction needs one evidence value per prior");
        out.priors = credal::alpha_cut(reduction->log_evidence, reduction->alpha);
    } else {
        for (std::size_t p = 0; p < instance.weights.size(); ++p)
            out.priors.push_back(p);
    }
    const auto sys = preference_system(instance, options.full_cardinal);
    check_margin(sys, options.xi);
    const auto n = instance.n_candidates;
    out.d.assign(n, std::vector<double>(n, INFINITY));
    std::vector<int> votes(n, 0);
    for (auto p : out.priors) {
        const auto d = pairwise(sys, instance, p, options.xi);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                out.d[a][b] = std::min(out.d[a][b], d[a][b]);
        for (auto a : nondominated(d, options.tolerance))
            ++votes[a];
    }
    for (std::size_t a = 0; a < n; ++a)
        if (votes[a] == static_cast<int>(out.priors.size()))
            out.intersection.push_back(a);
    out.nondominated = nondominated(out.d, options.tolerance);
    out.matches_intersection = out.nondominated == out.intersection;
    return out;
}

DominanceInstance instance_from_json(const nlohmann::json &j) {
    try {
        const auto &u = j.at("utilities");
        DominanceInstance inst;
        inst.n_candidates = u.size();
        if (inst.n_candidates == 0)
            throw DataError("instance has no candidates");
        inst.n_states = u.at(0).size();
        if (inst.n_states == 0)
            throw DataError("instance has no states");
        inst.n_dims = u.at(0).at(0).size();
        for (const auto &cand : u) {
            if (cand.size() != inst.n_states)
                throw DataError("every candidate needs the same number of states");
            for (const auto &vec : cand) {
                if (vec.size() != inst.n_dims)
                    throw DataError("every utility vector needs the same dimension");
                for (const auto &v : vec)
                    inst.utilities.push_back(v.get<double>());
            }
        }
        if (j.contains("weights"))
            inst.weights = j["weights"].get<std::vector<std::vector<double>>>();
        else if (inst.n_states == 1)
            inst.weights = {{1.0}};
        else
            throw DataError("instance with several states needs 'weights'");
        inst.validate();
        return inst;
    } catch (const nlohmann::json::exception &e) {
        throw DataError(std::string("invalid dominance instance: ") + e.what());
    }
}

nlohmann::json to_json(const DominanceInstance &instance) {
    nlohmann::json u = nlohmann::json::array();
    for (std::size_t a = 0; a < instance.n_candidates; ++a) {
        nlohmann::json cand = nlohmann::json::array();
        for (std::size_t s = 0; s < instance.n_states; ++s) {
            nlohmann::json vec = nlohmann::json::array();
            for (std::size_t d = 0; d < instance.n_dims; ++d)
                vec.push_back(instance.utility(a, s, d));
            cand.push_back(std::move(vec));
        }
        u.push_back(std::move(cand));
    }
    return {{"utilities", u}, {"weights", instance.weights}};
}

nlohmann::json to_json(const DominanceVerdict &verdict) {
    nlohmann::json d = nlohmann::json::array();
    for (const auto &row : verdict.d) {
        nlohmann::json r = nlohmann::json::array();
        for (double v : row)
            r.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
        d.push_back(std::move(r));
    }
    return {{"d", d},
            {"nondominated", verdict.nondominated},
            {"priors", verdict.priors},
            {"intersection", verdict.intersection},
            {"matches_intersection", verdict.matches_intersection}};
}

} // namespace rpls::gsd
