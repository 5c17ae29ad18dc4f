#include "rpls/selftrain.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "rpls/error.hpp"
#include "rpls/rng.hpp"

namespace rpls::selftrain {

namespace {

constexpr std::array<std::pair<Criterion, std::string_view>, 10> kNames{{
    {Criterion::prob_score, "prob_score"},
    {Criterion::variance, "variance"},
    {Criterion::likelihood_maxmax, "likelihood_maxmax"},
    {Criterion::ppp, "ppp"},
    {Criterion::multi_model_ppp, "multi_model_ppp"},
    {Criterion::occam_threshold, "occam_threshold"},
    {Criterion::multi_label, "multi_label"},
    {Criterion::full_bayes, "full_bayes"},
    {Criterion::multi_data, "multi_data"},
    {Criterion::gamma_maximin, "gamma_maximin"},
}};

constexpr int kMaxThresholdRetries = 10;

} // namespace

std::string_view to_string(Criterion c) noexcept {
    for (auto [k, name] : kNames)
        if (k == c)
            return name;
    return "unknown";
}

Criterion criterion_from_string(std::string_view name) {
    for (auto [k, n] : kNames)
        if (n == name)
            return k;
    throw DataError("unknown criterion '" + std::string(name) + "'");
}

Family CriterionConfig::resolved_family() const {
    if (family)
        return *family;
    switch (name) {
    case Criterion::multi_model_ppp:
        return Family::all_subsets;
    case Criterion::occam_threshold:
        return Family::nested;
    default:
        return Family::full;
    }
}

void LoopConfig::validate() const {
    if (batch_size < 1)
        throw DataError("batch size must be at least 1");
    if (max_rounds < 1)
        throw DataError("max_rounds must be at least 1");
    if (!(threshold_decay > 0.0 && threshold_decay < 1.0))
        throw DataError("threshold decay must lie in (0, 1)");
    if (ridge < 0.0)
        throw DataError("ridge must be nonnegative");
    if (criterion.name == Criterion::occam_threshold)
        criterion.thresholds.validate();
    if (criterion.name == Criterion::gamma_maximin &&
        !(criterion.alpha > 0.0 && criterion.alpha <= 1.0))
        throw DataError("alpha must lie in (0, 1]");
}

double accuracy(const glm::ModelFit &fit, const LabeledView &rows) {
    if (rows.size() == 0)
        return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto p = glm::predict_proba(fit, rows.data->row(rows.rows[i]));
        const int predicted = p[1] > p[0] ? 1 : 0;
        hits += predicted == rows.labels[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(rows.size());
}

namespace {

std::vector<glm::ModelSpec> make_family(Family family, std::size_t n_features) {
    switch (family) {
    case Family::all_subsets:
        return glm::all_subsets(n_features);
    case Family::nested:
        return glm::nested_chain(n_features);
    case Family::full:
        break;
    }
    glm::ModelSpec full;
    for (std::size_t j = 0; j < n_features; ++j)
        full.covariates.push_back(j);
    return {full};
}

std::vector<glm::ModelFit> fit_family(const LabeledView &d, const std::vector<glm::ModelSpec> &family,
                                      double ridge) {
    std::vector<glm::ModelFit> fits;
    for (const auto &spec : family) {
        try {
            fits.push_back(glm::fit(d, spec, ridge));
        } catch (const std::exception &e) {
            throw NumericalError("fit of model " + std::to_string(spec.model_id) +
                                 " failed: " + e.what());
        }
    }
    return fits;
}

struct RoundContext {
    const LabeledView &d;
    const PoolView &pool;
    const LoopConfig &config;
    const std::vector<glm::ModelSpec> &family;
    const std::vector<glm::ModelFit> &fits; ///< family fits on D, full model last
    std::size_t selected_so_far;
    const std::vector<double> &history;
    Rng &rng;
    criteria::ThresholdConfig thresholds;
};

criteria::SelectionResult gamma_maximin_round(const RoundContext &ctx,
                                              const criteria::UtilityTensor &tensor) {
    const auto &cfg = ctx.config.criterion;
    const auto &full = ctx.fits.back();
    const auto priors = credal::prior_set(full.theta, cfg.lattice);
    const double alpha =
        cfg.adaptive_alpha ? credal::adaptive_alpha(ctx.history) : cfg.alpha;
    const auto table = credal::expected_utilities(ctx.d, ctx.pool, tensor.predicted_label,
                                                  full.spec, priors);
    const glm::Design base(ctx.d, full.spec);
    std::vector<double> log_m;
    for (const auto &prior : priors)
        log_m.push_back(evidence::laplace_evidence(base, full.spec, prior).log_marginal);

    if (cfg.alpha_rule == CriterionConfig::AlphaRule::generic) {
        std::vector<std::vector<double>> kept;
        for (auto p : credal::alpha_cut(log_m, alpha))
            kept.push_back(table[p]);
        auto out = credal::gamma_maximin(kept);
        for (auto &[i, entry] : out.audit)
            entry["alpha"] = alpha;
        return out;
    }

    // Regret rule: evidences of D plus each labelled variant of the candidate.
    const auto n = ctx.pool.size();
    std::vector<double> scores(n);
    std::vector<bool> fell_back(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::array<double, 2>> m(priors.size());
        double sup = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < 2; ++j) {
            const auto design = base.with_row(ctx.pool.features(i), j);
            for (std::size_t p = 0; p < priors.size(); ++p) {
                m[p][static_cast<std::size_t>(j)] =
                    evidence::laplace_evidence(design, full.spec, priors[p]).log_marginal;
                sup = std::max(sup, m[p][static_cast<std::size_t>(j)]);
            }
        }
        const auto h = static_cast<std::size_t>(tensor.predicted_label[i]);
        std::vector<std::size_t> kept;
        for (std::size_t p = 0; p < priors.size(); ++p)
            if (m[p][h] >= std::log(alpha) + sup)
                kept.push_back(p);
        if (kept.empty()) {
            kept = credal::alpha_cut(log_m, alpha);
            fell_back[i] = true;
        }
        scores[i] = std::numeric_limits<double>::infinity();
        for (auto p : kept)
            scores[i] = std::min(scores[i], table[p][i]);
    }
    auto out = criteria::rank(scores, "gamma_maximin");
    for (std::size_t i = 0; i < n; ++i) {
        out.audit[i]["alpha"] = alpha;
        if (fell_back[i])
            out.audit[i]["regret_cut_empty_fallback"] = 1.0;
    }
    return out;
}

criteria::SelectionResult score_round(const RoundContext &ctx) {
    using criteria::Backend;
    const auto &cfg = ctx.config.criterion;
    switch (cfg.name) {
    case Criterion::prob_score:
        return criteria::probability_score(
            criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx));
    case Criterion::variance:
        return criteria::variance(ctx.fits.back(), ctx.pool);
    case Criterion::likelihood_maxmax:
        return criteria::single_model(
            criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::max_likelihood));
    case Criterion::ppp:
        return criteria::single_model(
            criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx));
    case Criterion::multi_model_ppp: {
        const auto tensor = criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx);
        const auto weights = cfg.model_weights.value_or(criteria::dimension_weights(ctx.family));
        return criteria::multi_model_weighted(tensor, weights);
    }
    case Criterion::occam_threshold:
        return criteria::threshold_occam(
            criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx),
            ctx.thresholds);
    case Criterion::multi_label:
        return criteria::multi_label(
            criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx));
    case Criterion::full_bayes: {
        const auto tensor = criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx);
        return criteria::full_bayes(tensor, tensor.predicted_proba);
    }
    case Criterion::multi_data: {
        const auto tensor = criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx);
        // D': D plus a random pseudo-labelled sample as large as the
        // selections made so far.
        LabeledView dprime = ctx.d;
        std::vector<std::size_t> order(ctx.pool.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = i;
        ctx.rng.shuffle(std::span<std::size_t>(order));
        const auto take = std::min(ctx.selected_so_far, order.size());
        for (std::size_t t = 0; t < take; ++t)
            dprime.push_back(ctx.pool.rows[order[t]], tensor.predicted_label[order[t]]);
        const auto fits_prime = fit_family(dprime, ctx.family, ctx.config.ridge);
        const auto tensor_prime =
            criteria::build_tensor(dprime, ctx.pool, fits_prime, Backend::ppp_approx);
        return criteria::multi_data(tensor, tensor_prime, cfg.aggregation);
    }
    case Criterion::gamma_maximin:
        return gamma_maximin_round(
            ctx, criteria::build_tensor(ctx.d, ctx.pool, ctx.fits, Backend::ppp_approx));
    }
    throw DataError("unhandled criterion");
}

} // namespace

LoopTrace run(const Dataset &data, const SplitState &split, const LoopConfig &config) {
    config.validate();
    if (data.class_count() != 2)
        throw DataError("self-training supports binary labels only");
    const auto family = make_family(config.criterion.resolved_family(), data.n_features());
    LabeledView d = training_view(data, split);
    PoolView pool = pool_view(data, split);
    const LabeledView test = test_view(data, split);

    LoopTrace trace;
    trace.criterion = std::string(to_string(config.criterion.name));
    Rng rng(config.seed);
    std::vector<double> history;
    std::size_t selected_so_far = 0;

    while (pool.size() > 0) {
        if (config.stopping == Stopping::max_rounds && trace.rounds.size() >= config.max_rounds)
            break;
        RoundRecord record;
        record.round = trace.rounds.size();
        record.n_labeled = d.size();
        record.pool_size = pool.size();

        std::vector<glm::ModelFit> fits;
        try {
            fits = fit_family(d, family, config.ridge);
        } catch (const std::exception &e) {
            trace.failed_round = record.round;
            trace.failure = e.what();
            break;
        }
        const auto &full = fits.back();
        record.theta.assign(full.theta.data(), full.theta.data() + full.theta.size());
        record.log_lik = full.log_lik;
        record.test_accuracy = accuracy(full, test);

        RoundContext ctx{d, pool, config, family, fits, selected_so_far, history, rng,
                         config.criterion.thresholds};
        criteria::SelectionResult result;
        bool stop = false;
        for (int attempt = 0;; ++attempt) {
            try {
                result = score_round(ctx);
                break;
            } catch (const ThresholdError &e) {
                if (!config.occam_refit || attempt >= kMaxThresholdRetries) {
                    record.note = std::string("stopped: ") + e.what();
                    stop = true;
                    break;
                }
                ctx.thresholds = ctx.thresholds.lowered(config.threshold_decay);
                record.note = "thresholds lowered " + std::to_string(attempt + 1) + " time(s)";
            } catch (const std::exception &e) {
                trace.failed_round = record.round;
                trace.failure = e.what();
                stop = true;
                break;
            }
        }
        if (stop) {
            if (!record.note.empty())
                trace.rounds.push_back(std::move(record));
            break;
        }
        if (result.ranked.empty()) {
            record.note = "stopped: criterion ranked no candidate";
            trace.rounds.push_back(std::move(record));
            break;
        }
        if (config.stopping == Stopping::score_floor &&
            result.ranked.front().score < config.score_floor) {
            record.note = "stopped: best score below floor";
            trace.rounds.push_back(std::move(record));
            break;
        }

        std::vector<std::size_t> picked;
        if (config.criterion.name == Criterion::occam_threshold) {
            picked = result.selected;
            if (config.mode == Mode::batch && picked.size() > config.batch_size)
                picked.resize(config.batch_size);
        } else {
            const auto b = config.mode == Mode::batch ? config.batch_size : std::size_t{1};
            for (std::size_t t = 0; t < std::min(b, result.ranked.size()); ++t)
                picked.push_back(result.ranked[t].candidate);
        }
        std::map<std::size_t, double> score_of;
        for (const auto &c : result.ranked)
            score_of.emplace(c.candidate, c.score);

        for (auto i : picked) {
            const auto p = glm::predict_proba(full, pool.features(i));
            const int label = p[1] > p[0] ? 1 : 0;
            record.rows.push_back(pool.rows[i]);
            record.labels.push_back(label);
            record.scores.push_back(score_of.count(i) ? score_of[i] : 0.0);
            history.push_back(std::max(p[0], p[1]));
            d.push_back(pool.rows[i], label);
        }
        std::vector<bool> drop(pool.size(), false);
        for (auto i : picked)
            drop[i] = true;
        std::vector<std::size_t> remaining;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (!drop[i])
                remaining.push_back(pool.rows[i]);
        pool.rows = std::move(remaining);
        selected_so_far += picked.size();
        trace.rounds.push_back(std::move(record));
    }

    glm::ModelSpec full_spec = make_family(Family::full, data.n_features()).front();
    try {
        const auto final_fit = glm::fit(d, full_spec, config.ridge);
        trace.final_theta.assign(final_fit.theta.data(),
                                 final_fit.theta.data() + final_fit.theta.size());
        trace.final_log_lik = final_fit.log_lik;
        trace.final_test_accuracy = accuracy(final_fit, test);
    } catch (const std::exception &e) {
        if (!trace.failed_round) {
            trace.failed_round = trace.rounds.size();
            trace.failure = std::string("final fit failed: ") + e.what();
        }
        trace.final_test_accuracy = std::numeric_limits<double>::quiet_NaN();
    }
    return trace;
}

Metrics evaluate(const LoopTrace &trace, const Dataset &data, const SplitState &split,
                 double ridge) {
    LabeledView d = training_view(data, split);
    std::size_t pseudo = 0;
    std::size_t wrong = 0;
    for (const auto &round : trace.rounds)
        for (std::size_t t = 0; t < round.rows.size(); ++t) {
            d.push_back(round.rows[t], round.labels[t]);
            ++pseudo;
            const auto &truth = data.label(round.rows[t]);
            if (truth && *truth != round.labels[t])
                ++wrong;
        }
    glm::ModelSpec full;
    for (std::size_t j = 0; j < data.n_features(); ++j)
        full.covariates.push_back(j);
    Metrics m;
    m.rounds = trace.rounds.size();
    m.test_accuracy = accuracy(glm::fit(d, full, ridge), test_view(data, split));
    m.pseudo_label_error =
        pseudo == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(pseudo);
    return m;
}

namespace {

nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json &j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

} // namespace

void write_jsonl(const LoopTrace &trace, std::ostream &out) {
    for (const auto &r : trace.rounds) {
        nlohmann::json j = {{"round", r.round},       {"rows", r.rows},
                            {"labels", r.labels},     {"scores", r.scores},
                            {"theta", r.theta},       {"log_lik", r.log_lik},
                            {"n_labeled", r.n_labeled}, {"pool_size", r.pool_size},
                            {"test_accuracy", r.test_accuracy}, {"note", r.note}};
        out << j.dump() << '\n';
    }
    nlohmann::json fin = {{"final", true},
                          {"criterion", trace.criterion},
                          {"theta", trace.final_theta},
                          {"log_lik", number_or_null(trace.final_log_lik)},
                          {"test_accuracy", number_or_null(trace.final_test_accuracy)},
                          {"failed_round", trace.failed_round
                                               ? nlohmann::json(*trace.failed_round)
                                               : nlohmann::json(nullptr)},
                          {"failure", trace.failure}};
    out << fin.dump() << '\n';
}

LoopTrace read_jsonl(std::istream &in) {
    LoopTrace trace;
    std::string line;
    bool finished = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto j = nlohmann::json::parse(line);
        if (j.contains("final")) {
            trace.criterion = j.at("criterion").get<std::string>();
            trace.final_theta = j.at("theta").get<std::vector<double>>();
            trace.final_log_lik = number_from(j.at("log_lik"));
            trace.final_test_accuracy = number_from(j.at("test_accuracy"));
            if (!j.at("failed_round").is_null())
                trace.failed_round = j.at("failed_round").get<std::size_t>();
            trace.failure = j.at("failure").get<std::string>();
            finished = true;
            continue;
        }
        RoundRecord r;
        r.round = j.at("round").get<std::size_t>();
        r.rows = j.at("rows").get<std::vector<std::size_t>>();
        r.labels = j.at("labels").get<std::vector<int>>();
        r.scores = j.at("scores").get<std::vector<double>>();
        r.theta = j.at("theta").get<std::vector<double>>();
        r.log_lik = j.at("log_lik").get<double>();
        r.n_labeled = j.at("n_labeled").get<std::size_t>();
        r.pool_size = j.at("pool_size").get<std::size_t>();
        r.test_accuracy = j.at("test_accuracy").get<double>();
        r.note = j.at("note").get<std::string>();
        trace.rounds.push_back(std::move(r));
    }
    if (!finished)
        throw DataError("trace has no final summary line");
    return trace;
}

namespace {

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::array<std::pair<E, std::string_view>, N> &table) {
    for (auto [k, n] : table)
        if (k == value)
            return n;
    return "unknown";
}

template <typename E, std::size_t N>
E enum_value(const std::string &name, const std::array<std::pair<E, std::string_view>, N> &table,
             const char *what) {
    for (auto [k, n] : table)
        if (n == name)
            return k;
    throw DataError(std::string("unknown ") + what + " '" + name + "'");
}

constexpr std::array<std::pair<Family, std::string_view>, 3> kFamilies{
    {{Family::full, "full"}, {Family::all_subsets, "all_subsets"}, {Family::nested, "nested"}}};
constexpr std::array<std::pair<Mode, std::string_view>, 2> kModes{
    {{Mode::incremental, "incremental"}, {Mode::batch, "batch"}}};
constexpr std::array<std::pair<Stopping, std::string_view>, 3> kStopping{
    {{Stopping::exhaust_pool, "exhaust_pool"},
     {Stopping::max_rounds, "max_rounds"},
     {Stopping::score_floor, "score_floor"}}};
constexpr std::array<std::pair<criteria::Aggregation, std::string_view>, 2> kAggregations{
    {{criteria::Aggregation::min, "min"}, {criteria::Aggregation::gsd, "gsd"}}};
constexpr std::array<std::pair<CriterionConfig::AlphaRule, std::string_view>, 2> kRules{
    {{CriterionConfig::AlphaRule::generic, "generic"},
     {CriterionConfig::AlphaRule::regret, "regret"}}};
constexpr std::array<std::pair<criteria::ThresholdConfig::Mode, std::string_view>, 2>
    kThresholdModes{{{criteria::ThresholdConfig::Mode::quantile, "quantile"},
                     {criteria::ThresholdConfig::Mode::absolute, "absolute"}}};

} // namespace

nlohmann::json to_json(const CriterionConfig &c) {
    nlohmann::json j = {{"name", to_string(c.name)}};
    if (c.family)
        j["family"] = enum_name(*c.family, kFamilies);
    if (c.model_weights)
        j["model_weights"] = *c.model_weights;
    j["thresholds"] = {{"mode", enum_name(c.thresholds.mode, kThresholdModes)},
                       {"tau", c.thresholds.tau},
                       {"xi", c.thresholds.xi}};
    j["aggregation"] = enum_name(c.aggregation, kAggregations);
    j["alpha"] = c.adaptive_alpha ? nlohmann::json("adaptive") : nlohmann::json(c.alpha);
    j["alpha_rule"] = enum_name(c.alpha_rule, kRules);
    j["prior_lattice"] = {{"offsets", c.lattice.offsets},
                          {"scales", c.lattice.scales},
                          {"include_origin", c.lattice.include_origin}};
    return j;
}

CriterionConfig criterion_config_from_json(const nlohmann::json &j) {
    CriterionConfig c;
    if (j.is_string()) {
        c.name = criterion_from_string(j.get<std::string>());
        return c;
    }
    c.name = criterion_from_string(j.at("name").get<std::string>());
    if (j.contains("family"))
        c.family = enum_value(j["family"].get<std::string>(), kFamilies, "model family");
    if (j.contains("model_weights"))
        c.model_weights = j["model_weights"].get<std::vector<double>>();
    if (j.contains("thresholds")) {
        const auto &t = j["thresholds"];
        if (t.contains("mode"))
            c.thresholds.mode = enum_value(t["mode"].get<std::string>(), kThresholdModes,
                                           "threshold mode");
        c.thresholds.tau = t.value("tau", c.thresholds.tau);
        c.thresholds.xi = t.value("xi", c.thresholds.xi);
    }
    if (j.contains("aggregation"))
        c.aggregation = enum_value(j["aggregation"].get<std::string>(), kAggregations, "aggregation");
    if (j.contains("alpha")) {
        if (j["alpha"].is_string()) {
            if (j["alpha"].get<std::string>() != "adaptive")
                throw DataError("alpha must be a number or \"adaptive\"");
            c.adaptive_alpha = true;
        } else {
            c.alpha = j["alpha"].get<double>();
        }
    }
    if (j.contains("alpha_rule"))
        c.alpha_rule = enum_value(j["alpha_rule"].get<std::string>(), kRules, "alpha rule");
    if (j.contains("prior_lattice")) {
        const auto &l = j["prior_lattice"];
        c.lattice.offsets = l.value("offsets", c.lattice.offsets);
        c.lattice.scales = l.value("scales", c.lattice.scales);
        c.lattice.include_origin = l.value("include_origin", c.lattice.include_origin);
    }
    return c;
}

nlohmann::json to_json(const LoopConfig &c) {
    return {{"criterion", to_json(c.criterion)},
            {"mode", enum_name(c.mode, kModes)},
            {"batch_size", c.batch_size},
            {"stopping", enum_name(c.stopping, kStopping)},
            {"max_rounds", c.max_rounds},
            {"score_floor", c.score_floor},
            {"occam_refit", c.occam_refit},
            {"threshold_decay", c.threshold_decay},
            {"seed", c.seed},
            {"ridge", c.ridge}};
}

LoopConfig loop_config_from_json(const nlohmann::json &j) {
    LoopConfig c;
    if (j.contains("criterion"))
        c.criterion = criterion_config_from_json(j["criterion"]);
    if (j.contains("mode"))
        c.mode = enum_value(j["mode"].get<std::string>(), kModes, "mode");
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("stopping"))
        c.stopping = enum_value(j["stopping"].get<std::string>(), kStopping, "stopping rule");
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    c.score_floor = j.value("score_floor", c.score_floor);
    c.occam_refit = j.value("occam_refit", c.occam_refit);
    c.threshold_decay = j.value("threshold_decay", c.threshold_decay);
    c.seed = j.value("seed", c.seed);
    c.ridge = j.value("ridge", c.ridge);
    c.validate();
    return c;
}

} // namespace rpls::selftrain
