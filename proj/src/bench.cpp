#include "rpls/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "rpls/error.hpp"

namespace rpls::bench {

void ExperimentConfig::validate() const {
    if (repetitions < 1)
        throw DataError("repetitions must be at least 1");
    if (criteria.empty())
        throw DataError("at least one criterion is required");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw DataError("test_fraction must lie in (0, 1)");
    if (!(unlabeled_fraction >= 0.0 && unlabeled_fraction < 1.0))
        throw DataError("unlabeled_fraction must lie in [0, 1)");
    if (dataset.csv.has_value() == dataset.synthetic.has_value())
        throw DataError("dataset needs exactly one of 'csv' or 'synthetic'");
    for (const auto &c : criteria)
        if (c.label == kBaseline)
            throw DataError(std::string("criterion label '") + kBaseline + "' is reserved");
    loop.validate();
}

ExperimentConfig config_from_json(const nlohmann::json &j) {
    try {
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion)
            throw DataError("unsupported schema_version " + std::to_string(version) +
                            " (expected " + std::to_string(kSchemaVersion) + ")");
        ExperimentConfig c;
        const auto &ds = j.at("dataset");
        if (ds.contains("csv")) {
            c.dataset.csv = ds["csv"].get<std::string>();
            c.dataset.label_column = ds.value("label_column", c.dataset.label_column);
            c.dataset.features = ds.value("features", std::vector<std::string>{});
            if (ds.contains("class_levels"))
                c.dataset.class_levels = ds["class_levels"].get<std::vector<std::string>>();
        }
        if (ds.contains("synthetic")) {
            const auto &s = ds["synthetic"];
            SyntheticSpec spec;
            spec.n_rows = s.at("n_rows").get<std::size_t>();
            spec.coefficients = s.at("coefficients").get<std::vector<double>>();
            spec.intercept = s.value("intercept", 0.0);
            spec.seed = s.value("seed", std::uint64_t{1});
            c.dataset.synthetic = spec;
        }
        c.unlabeled_fraction = j.value("unlabeled_fraction", c.unlabeled_fraction);
        c.test_fraction = j.value("test_fraction", c.test_fraction);
        c.repetitions = j.value("repetitions", c.repetitions);
        c.base_seed = j.value("base_seed", c.base_seed);
        if (j.contains("loop"))
            c.loop = selftrain::loop_config_from_json(j["loop"]);
        for (const auto &entry : j.at("criteria")) {
            CriterionEntry e;
            e.config = selftrain::criterion_config_from_json(entry);
            e.label = entry.is_object() && entry.contains("label")
                          ? entry["label"].get<std::string>()
                          : std::string(selftrain::to_string(e.config.name));
            c.criteria.push_back(std::move(e));
        }
        c.validate();
        return c;
    } catch (const nlohmann::json::exception &e) {
        throw DataError(std::string("invalid experiment config: ") + e.what());
    }
}

nlohmann::json to_json(const ExperimentConfig &c) {
    nlohmann::json ds;
    if (c.dataset.csv) {
        ds["csv"] = c.dataset.csv->string();
        ds["label_column"] = c.dataset.label_column;
        ds["features"] = c.dataset.features;
        if (c.dataset.class_levels)
            ds["class_levels"] = *c.dataset.class_levels;
    }
    if (c.dataset.synthetic) {
        const auto &s = *c.dataset.synthetic;
        ds["synthetic"] = {{"n_rows", s.n_rows},
                           {"coefficients", s.coefficients},
                           {"intercept", s.intercept},
                           {"seed", s.seed}};
    }
    nlohmann::json criteria = nlohmann::json::array();
    for (const auto &e : c.criteria) {
        auto j = selftrain::to_json(e.config);
        j["label"] = e.label;
        criteria.push_back(std::move(j));
    }
    auto loop = selftrain::to_json(c.loop);
    loop.erase("criterion");
    return {{"schema_version", kSchemaVersion},
            {"dataset", ds},
            {"unlabeled_fraction", c.unlabeled_fraction},
            {"test_fraction", c.test_fraction},
            {"repetitions", c.repetitions},
            {"base_seed", c.base_seed},
            {"criteria", criteria},
            {"loop", loop}};
}

Dataset load_dataset(const DatasetSource &source) {
    if (source.synthetic) {
        const auto &s = *source.synthetic;
        return generate_binomial(s.n_rows, s.coefficients, s.intercept, s.seed);
    }
    if (!source.csv)
        throw DataError("dataset source has neither a CSV path nor a synthetic spec");
    auto data = load_csv(*source.csv, source.label_column, source.class_levels);
    if (!source.features.empty())
        data = data.select_features(source.features);
    return data;
}

std::vector<Summary> BenchReport::summaries() const {
    auto summarize = [](const std::string &name, const std::vector<const Cell *> &cells) {
        Summary s{name, 0.0, 0.0, 0};
        std::vector<double> values;
        for (const auto *c : cells)
            if (!c->failed)
                values.push_back(c->final_accuracy);
        s.n = values.size();
        if (values.empty())
            return s;
        double sum = 0.0;
        for (double v : values)
            sum += v;
        s.mean = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values)
                ss += (v - s.mean) * (v - s.mean);
            s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        return s;
    };
    std::vector<Summary> out;
    std::vector<const Cell *> base;
    for (const auto &c : baseline)
        base.push_back(&c);
    out.push_back(summarize(kBaseline, base));
    for (const auto &name : criteria) {
        std::vector<const Cell *> group;
        for (const auto &c : cells)
            if (c.criterion == name)
                group.push_back(&c);
        out.push_back(summarize(name, group));
    }
    return out;
}

const Cell &BenchReport::cell(const std::string &criterion, std::size_t repetition) const {
    if (criterion == kBaseline)
        return baseline.at(repetition);
    for (const auto &c : cells)
        if (c.criterion == criterion && c.repetition == repetition)
            return c;
    throw DataError("no cell for criterion '" + criterion + "'");
}

std::size_t worker_count() {
    if (const char *env = std::getenv("RPLS_THREADS")) {
        const std::string text(env);
        std::size_t value = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec == std::errc{} && ptr == text.data() + text.size() && value > 0)
            return value;
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

namespace {

Cell baseline_cell(const Dataset &data, const SplitState &split, double ridge, std::size_t rep) {
    Cell cell{kBaseline, rep};
    try {
        glm::ModelSpec full;
        for (std::size_t j = 0; j < data.n_features(); ++j)
            full.covariates.push_back(j);
        const auto fit = glm::fit(training_view(data, split), full, ridge);
        cell.final_accuracy = selftrain::accuracy(fit, test_view(data, split));
        cell.curve = {cell.final_accuracy};
    } catch (const std::exception &e) {
        cell.failed = true;
        cell.error = e.what();
    }
    return cell;
}

Cell criterion_cell(const Dataset &data, const SplitState &split, const CriterionEntry &entry,
                    selftrain::LoopConfig loop, std::size_t rep) {
    Cell cell{entry.label, rep};
    loop.criterion = entry.config;
    loop.seed = split.rng_seed;
    try {
        const auto trace = selftrain::run(data, split, loop);
        for (const auto &r : trace.rounds)
            cell.curve.push_back(r.test_accuracy);
        cell.curve.push_back(trace.final_test_accuracy);
        cell.rounds = trace.rounds.size();
        cell.final_accuracy = trace.final_test_accuracy;
        if (trace.failed_round) {
            cell.failed = true;
            cell.error = "round " + std::to_string(*trace.failed_round) + ": " + trace.failure;
        } else {
            cell.pseudo_label_error =
                selftrain::evaluate(trace, data, split, loop.ridge).pseudo_label_error;
        }
    } catch (const std::exception &e) {
        cell.failed = true;
        cell.error = e.what();
    }
    if (cell.failed && !std::isfinite(cell.final_accuracy))
        cell.final_accuracy = 0.0;
    return cell;
}

} // namespace

BenchReport run_experiment(const ExperimentConfig &config, std::optional<std::size_t> threads) {
    config.validate();
    const Dataset data = load_dataset(config.dataset);
    const auto reps = config.repetitions;
    const auto n_crit = config.criteria.size();

    BenchReport report;
    report.repetitions = reps;
    for (const auto &c : config.criteria)
        report.criteria.push_back(c.label);
    report.cells.resize(n_crit * reps);
    report.baseline.resize(reps);

    // Work items: (repetition, criterion or baseline); results land in fixed slots.
    const std::size_t items = reps * (n_crit + 1);
    std::vector<SplitState> splits(reps);
    for (std::size_t r = 0; r < reps; ++r)
        splits[r] = make_split(data, config.unlabeled_fraction, config.test_fraction,
                               config.base_seed + r);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t item = next++; item < items; item = next++) {
            const auto r = item / (n_crit + 1);
            const auto c = item % (n_crit + 1);
            if (c == n_crit)
                report.baseline[r] = baseline_cell(data, splits[r], config.loop.ridge, r);
            else
                report.cells[c * reps + r] =
                    criterion_cell(data, splits[r], config.criteria[c], config.loop, r);
        }
    };
    const auto n_threads = std::min(threads.value_or(worker_count()), items);
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t)
        pool.emplace_back(worker);
    worker();
    pool.clear();
    return report;
}

Format format_from_string(const std::string &name) {
    if (name == "csv")
        return Format::csv;
    if (name == "csv_curves")
        return Format::csv_curves;
    if (name == "markdown" || name == "md")
        return Format::markdown;
    if (name == "json")
        return Format::json;
    throw DataError("unknown report format '" + name + "'");
}

namespace {

std::string shortest(double v) {
    if (!std::isfinite(v))
        return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

nlohmann::json cell_json(const Cell &c) {
    nlohmann::json curve = nlohmann::json::array();
    for (double v : c.curve)
        curve.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    return {{"criterion", c.criterion},
            {"repetition", c.repetition},
            {"final_accuracy", c.final_accuracy},
            {"curve", curve},
            {"rounds", c.rounds},
            {"pseudo_label_error", c.pseudo_label_error},
            {"failed", c.failed},
            {"error", c.error}};
}

Cell cell_from(const nlohmann::json &j) {
    Cell c;
    c.criterion = j.at("criterion").get<std::string>();
    c.repetition = j.at("repetition").get<std::size_t>();
    c.final_accuracy = j.at("final_accuracy").get<double>();
    for (const auto &v : j.at("curve"))
        c.curve.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    c.rounds = j.at("rounds").get<std::size_t>();
    c.pseudo_label_error = j.at("pseudo_label_error").get<double>();
    c.failed = j.at("failed").get<bool>();
    c.error = j.at("error").get<std::string>();
    return c;
}

} // namespace

nlohmann::json to_json(const BenchReport &report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto &c : report.cells)
        cells.push_back(cell_json(c));
    nlohmann::json base = nlohmann::json::array();
    for (const auto &c : report.baseline)
        base.push_back(cell_json(c));
    nlohmann::json summary = nlohmann::json::array();
    for (const auto &s : report.summaries())
        summary.push_back({{"criterion", s.criterion}, {"mean", s.mean}, {"sd", s.sd}, {"n", s.n}});
    return {{"schema_version", kSchemaVersion},
            {"criteria", report.criteria},
            {"repetitions", report.repetitions},
            {"cells", cells},
            {"baseline", base},
            {"summary", summary}};
}

BenchReport report_from_json(const nlohmann::json &j) {
    try {
        BenchReport r;
        r.criteria = j.at("criteria").get<std::vector<std::string>>();
        r.repetitions = j.at("repetitions").get<std::size_t>();
        for (const auto &c : j.at("cells"))
            r.cells.push_back(cell_from(c));
        for (const auto &c : j.at("baseline"))
            r.baseline.push_back(cell_from(c));
        return r;
    } catch (const nlohmann::json::exception &e) {
        throw DataError(std::string("invalid report JSON: ") + e.what());
    }
}

std::string render(const BenchReport &report, Format format) {
    std::ostringstream out;
    switch (format) {
    case Format::csv:
        out << "criterion,repetition,round,accuracy\n";
        for (const auto &c : report.baseline)
            out << c.criterion << ',' << c.repetition << ',' << c.rounds << ','
                << (c.failed ? "nan" : shortest(c.final_accuracy)) << '\n';
        for (const auto &c : report.cells)
            out << c.criterion << ',' << c.repetition << ',' << c.rounds << ','
                << (c.failed ? "nan" : shortest(c.final_accuracy)) << '\n';
        break;
    case Format::csv_curves:
        out << "criterion,repetition,round,accuracy\n";
        for (const auto *group : {&report.baseline, &report.cells})
            for (const auto &c : *group)
                for (std::size_t t = 0; t < c.curve.size(); ++t)
                    out << c.criterion << ',' << c.repetition << ',' << t << ','
                        << shortest(c.curve[t]) << '\n';
        break;
    case Format::markdown:
        out << "| criterion | mean | sd | n |\n|---|---|---|---|\n";
        for (const auto &s : report.summaries())
            out << "| " << s.criterion << " | " << fixed(s.mean, 4) << " | " << fixed(s.sd, 4)
                << " | " << s.n << " |\n";
        break;
    case Format::json:
        out << to_json(report).dump(2) << '\n';
        break;
    }
    return out.str();
}

void emit_report(const BenchReport &report, Format format, const std::filesystem::path &path) {
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw DataError("cannot write report to " + path.string());
    file << render(report, format);
    if (!file)
        throw DataError("failed while writing " + path.string());
}

} // namespace rpls::bench
