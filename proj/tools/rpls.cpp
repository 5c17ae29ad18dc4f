#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rpls/audit.hpp"
#include "rpls/bench.hpp"
#include "rpls/error.hpp"
#include "rpls/glm.hpp"
#include "rpls/gsd.hpp"
#include "rpls/selftrain.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

json read_json(const fs::path &path) {
    std::ifstream in(path);
    if (!in)
        throw rpls::DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw rpls::DataError(path.string() + ": " + e.what());
    }
}

rpls::bench::ExperimentConfig load_config(const fs::path &path) {
    auto config = rpls::bench::config_from_json(read_json(path));
    // CSV paths in a config file are relative to the file.
    if (config.dataset.csv && config.dataset.csv->is_relative())
        config.dataset.csv = path.parent_path() / *config.dataset.csv;
    return config;
}

int cmd_fit(const fs::path &csv, const std::string &label_column,
            const std::vector<std::string> &features, double ridge, bool no_intercept) {
    auto data = rpls::load_csv(csv, label_column);
    if (!features.empty())
        data = data.select_features(features);
    rpls::LabeledView view{&data, {}, {}};
    for (std::size_t i = 0; i < data.n_rows(); ++i)
        if (data.label(i))
            view.push_back(i, *data.label(i));
    rpls::glm::ModelSpec spec;
    spec.intercept = !no_intercept;
    for (std::size_t j = 0; j < data.n_features(); ++j)
        spec.covariates.push_back(j);
    const auto fit = rpls::glm::fit(view, spec, ridge);

    const rpls::glm::Design design(view, spec);
    const Eigen::MatrixXd cov = fit.fisher.inverse();
    json coefficients = json::array();
    for (Eigen::Index k = 0; k < fit.theta.size(); ++k)
        coefficients.push_back({{"name", design.column_names()[static_cast<std::size_t>(k)]},
                                {"estimate", fit.theta[k]},
                                {"std_error", std::sqrt(cov(k, k))}});
    const json out{{"n_obs", fit.n_obs},        {"log_lik", fit.log_lik},
                   {"converged", fit.converged}, {"iterations", fit.iterations},
                   {"ridge", fit.ridge},         {"coefficients", coefficients}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_selftrain(const fs::path &config_path, std::size_t repetition, const std::string &out) {
    const auto config = load_config(config_path);
    if (repetition >= config.repetitions)
        throw rpls::DataError("repetition index out of range");
    const auto data = rpls::bench::load_dataset(config.dataset);
    const auto seed = config.base_seed + repetition;
    const auto split =
        rpls::make_split(data, config.unlabeled_fraction, config.test_fraction, seed);
    auto loop = config.loop;
    loop.criterion = config.criteria.front().config;
    loop.seed = seed;
    const auto trace = rpls::selftrain::run(data, split, loop);
    if (out.empty() || out == "-") {
        rpls::selftrain::write_jsonl(trace, std::cout);
    } else {
        std::ofstream file(out);
        if (!file)
            throw rpls::DataError("cannot write " + out);
        rpls::selftrain::write_jsonl(trace, file);
    }
    if (trace.failed_round) {
        std::cerr << "loop stopped at round " << *trace.failed_round << ": " << trace.failure
                  << '\n';
        return kRuntimeError;
    }
    return 0;
}

int cmd_bench(const fs::path &config_path, const fs::path &out_dir,
              const std::vector<std::string> &formats, std::optional<std::size_t> threads) {
    const auto config = load_config(config_path);
    std::vector<rpls::bench::Format> parsed;
    for (const auto &f : formats)
        parsed.push_back(rpls::bench::format_from_string(f));
    const auto report = rpls::bench::run_experiment(config, threads);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        const auto &name = formats[i];
        const std::string file = name == "csv"          ? "report.csv"
                                 : name == "csv_curves" ? "curves.csv"
                                 : name == "json"       ? "report.json"
                                                        : "summary.md";
        rpls::bench::emit_report(report, parsed[i], out_dir / file);
    }
    std::cout << rpls::bench::render(report, rpls::bench::Format::markdown);
    std::size_t failed = 0;
    for (const auto &c : report.cells)
        failed += c.failed ? 1 : 0;
    if (failed > 0)
        std::cerr << failed << " cell(s) failed; see the json report for messages\n";
    return 0;
}

int cmd_gsd(const fs::path &instance_path, double xi, bool full_cardinal,
            std::optional<double> alpha) {
    const auto j = read_json(instance_path);
    const auto instance = rpls::gsd::instance_from_json(j);
    rpls::gsd::Options options;
    options.xi = xi;
    options.full_cardinal = full_cardinal;
    std::optional<rpls::gsd::AlphaReduction> reduction;
    if (alpha) {
        if (!j.contains("log_evidence"))
            throw rpls::DataError("--alpha needs 'log_evidence' in the instance file");
        reduction = rpls::gsd::AlphaReduction{j["log_evidence"].get<std::vector<double>>(), *alpha};
    }
    const auto verdict = rpls::gsd::solution_set_Pi(instance, reduction, options);
    std::cout << rpls::gsd::to_json(verdict).dump(2) << '\n';
    return 0;
}

int cmd_oracle(const std::string &kind, std::size_t count, std::uint64_t seed, double alpha) {
    std::size_t failures = 0;
    if (kind == "ppp") {
        double min_tau = 1.0;
        for (std::size_t i = 0; i < count; ++i) {
            const auto r = rpls::audit::ppp_fidelity(seed + i);
            min_tau = std::min(min_tau, r.tau);
            failures += r.top1_agree ? 0 : 1;
            std::cout << json{{"problem", i}, {"top1_agree", r.top1_agree}, {"tau", r.tau}}.dump()
                      << '\n';
        }
        std::cout << json{{"kind", kind}, {"top1_disagreements", failures}, {"min_tau", min_tau}}
                         .dump()
                  << '\n';
    } else if (kind == "gsd") {
        // Single-state instances: nondominated set equals the Pareto front.
        rpls::Rng rng(seed);
        for (std::size_t i = 0; i < count; ++i) {
            auto inst = rpls::audit::random_dominance(rng, 6, 1, 1);
            std::vector<std::vector<double>> vectors;
            for (std::size_t a = 0; a < inst.n_candidates; ++a) {
                std::vector<double> v;
                for (std::size_t d = 0; d < inst.n_dims; ++d)
                    v.push_back(inst.utility(a, 0, d));
                vectors.push_back(std::move(v));
            }
            const auto verdict = rpls::gsd::solution_set_pi(inst, 0);
            const bool agree = verdict.nondominated == rpls::gsd::pareto_front(vectors);
            failures += agree ? 0 : 1;
            std::cout << json{{"instance", i}, {"pareto_agree", agree}}.dump() << '\n';
        }
        std::cout << json{{"kind", kind}, {"disagreements", failures}}.dump() << '\n';
    } else if (kind == "regret") {
        rpls::Rng rng(seed);
        double worst = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const auto problem = rpls::audit::random_regret(rng);
            const auto g = rpls::credal::check_regret_guarantee(problem, alpha);
            worst = std::max(worst, g.max_expected_regret);
            failures += g.holds ? 0 : 1;
            std::cout << json{{"instance", i},
                              {"max_expected_regret", g.max_expected_regret},
                              {"bound", g.bound},
                              {"holds", g.holds},
                              {"evidence_ratio_holds", g.ratio_holds}}
                             .dump()
                      << '\n';
        }
        std::cout << json{{"kind", kind}, {"violations", failures}, {"worst", worst}}.dump()
                  << '\n';
    } else {
        throw rpls::DataError("unknown oracle '" + kind + "' (ppp, gsd, regret)");
    }
    return failures == 0 ? 0 : kRuntimeError;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Robust pseudo-label selection for semi-supervised logistic regression"};
    app.require_subcommand(1);

    auto *fit = app.add_subcommand("fit", "Fit a logistic regression to a CSV file");
    fs::path fit_csv;
    std::string label_column = "label";
    std::vector<std::string> features;
    double ridge = 0.0;
    bool no_intercept = false;
    fit->add_option("csv", fit_csv, "Input CSV")->required();
    fit->add_option("--label-column", label_column, "Label column name");
    fit->add_option("--features", features, "Feature columns (default: all others)");
    fit->add_option("--ridge", ridge, "L2 penalty");
    fit->add_flag("--no-intercept", no_intercept, "Drop the intercept");

    auto *selftrain = app.add_subcommand("selftrain", "Run one self-training loop");
    fs::path st_config;
    std::size_t repetition = 0;
    std::string st_out;
    selftrain->add_option("config", st_config, "Experiment config JSON (first criterion is used)")
        ->required();
    selftrain->add_option("--repetition", repetition, "Split index (seed = base_seed + index)");
    selftrain->add_option("-o,--out", st_out, "Trace file (JSON lines); stdout by default");

    auto *bench = app.add_subcommand("bench", "Run an experiment sweep");
    fs::path bench_config;
    fs::path out_dir = "bench_out";
    std::vector<std::string> formats{"csv", "csv_curves", "markdown", "json"};
    std::optional<std::size_t> threads;
    bench->add_option("config", bench_config, "Experiment config JSON")->required();
    bench->add_option("-o,--out-dir", out_dir, "Report directory");
    bench->add_option("--formats", formats, "csv, csv_curves, markdown, json");
    bench->add_option("--threads", threads, "Worker threads (default: RPLS_THREADS or all cores)");

    auto *gsd = app.add_subcommand("gsd", "Nondominated set of a dominance instance");
    fs::path instance;
    double xi = 0.0;
    bool full_cardinal = false;
    std::optional<double> alpha;
    gsd->add_option("instance", instance, "Instance JSON")->required();
    gsd->add_option("--xi", xi, "Strict comparability margin");
    gsd->add_flag("--full-cardinal", full_cardinal, "Enumerate every cardinal quadruple");
    gsd->add_option("--alpha", alpha, "Alpha-cut on the instance's log_evidence");

    auto *oracle = app.add_subcommand("oracle", "Run randomized oracle comparisons");
    std::string kind = "ppp";
    std::size_t count = 20;
    std::uint64_t seed = 1;
    double oracle_alpha = 0.5;
    oracle->add_option("kind", kind, "ppp, gsd or regret")->required();
    oracle->add_option("--count", count, "Number of random instances");
    oracle->add_option("--seed", seed, "Base seed");
    oracle->add_option("--alpha", oracle_alpha, "Alpha for the regret oracle");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (fit->parsed())
            return cmd_fit(fit_csv, label_column, features, ridge, no_intercept);
        if (selftrain->parsed())
            return cmd_selftrain(st_config, repetition, st_out);
        if (bench->parsed())
            return cmd_bench(bench_config, out_dir, formats, threads);
        if (gsd->parsed())
            return cmd_gsd(instance, xi, full_cardinal, alpha);
        return cmd_oracle(kind, count, seed, oracle_alpha);
    } catch (const rpls::DataError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const json::exception &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}
