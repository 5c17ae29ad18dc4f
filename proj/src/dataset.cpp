#include "rpls/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rpls/error.hpp"
#include "rpls/rng.hpp"

namespace rpls {

Dataset::Dataset(std::size_t n_rows, std::size_t n_features, std::vector<double> features,
                 std::vector<std::optional<int>> labels, std::vector<std::string> feature_names,
                 std::vector<std::string> class_names)
    : n_rows_(n_rows), n_features_(n_features), features_(std::move(features)),
      labels_(std::move(labels)), feature_names_(std::move(feature_names)),
      class_names_(std::move(class_names)) {
    if (n_rows_ == 0 || n_features_ == 0)
        throw DataError("dataset needs at least one row and one feature");
    if (features_.size() != n_rows_ * n_features_)
        throw DataError("feature matrix size does not match n_rows x n_features");
    if (labels_.size() != n_rows_)
        throw DataError("label vector length does not match n_rows");
    if (feature_names_.size() != n_features_)
        throw DataError("feature name count does not match n_features");
    if (class_names_.empty())
        throw DataError("dataset needs at least one class");
    for (std::size_t i = 0; i < n_rows_; ++i)
        if (labels_[i] && (*labels_[i] < 0 || *labels_[i] >= class_count()))
            throw DataError("row " + std::to_string(i) + ": label out of range");
}

std::size_t Dataset::feature_index(const std::string &name) const {
    const auto it = std::find(feature_names_.begin(), feature_names_.end(), name);
    if (it == feature_names_.end())
        throw DataError("unknown feature column '" + name + "'");
    return static_cast<std::size_t>(it - feature_names_.begin());
}

Dataset Dataset::select_features(const std::vector<std::string> &names) const {
    std::vector<std::size_t> cols;
    cols.reserve(names.size());
    for (const auto &name : names)
        cols.push_back(feature_index(name));
    std::vector<double> values;
    values.reserve(n_rows_ * cols.size());
    for (std::size_t i = 0; i < n_rows_; ++i)
        for (auto c : cols)
            values.push_back(at(i, c));
    return Dataset(n_rows_, cols.size(), std::move(values), labels_, names, class_names_);
}

namespace {

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos)
        return {};
    auto end = s.find_last_not_of(" \t\r");
    std::string out(s.substr(begin, end - begin + 1));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"')
        out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_line(const std::string &line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    return cells;
}

std::string location(std::size_t line, std::size_t column, const std::string &header) {
    return "line " + std::to_string(line) + ", column " + std::to_string(column + 1) + " ('" +
           header + "')";
}

} // namespace

Dataset load_csv(const std::filesystem::path &path, const std::string &label_column,
                 const std::optional<std::vector<std::string>> &class_levels) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line) || trim(line).empty())
        throw DataError("'" + path.string() + "' is empty");
    const auto header = split_line(line);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end())
        throw DataError("label column '" + label_column + "' not found in header of '" +
                        path.string() + "'");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());

    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_col)
            feature_names.push_back(header[c]);

    std::vector<std::string> classes = class_levels.value_or(std::vector<std::string>{});
    std::vector<double> features;
    std::vector<std::optional<int>> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto &cell = cells[c];
            if (c == label_col) {
                if (cell.empty()) {
                    labels.emplace_back(std::nullopt);
                    continue;
                }
                auto found = std::find(classes.begin(), classes.end(), cell);
                if (found == classes.end()) {
                    if (class_levels)
                        throw DataError(path.string() + ": unknown label level '" + cell + "' at " +
                                        location(line_no, c, header[c]));
                    classes.push_back(cell);
                    found = classes.end() - 1;
                }
                labels.emplace_back(static_cast<int>(found - classes.begin()));
                continue;
            }
            double value = 0.0;
            const auto *first = cell.data();
            const auto *last = cell.data() + cell.size();
            if (!cell.empty() && *first == '+')
                ++first;
            const auto [ptr, ec] = std::from_chars(first, last, value);
            if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value))
                throw DataError(path.string() + ": non-numeric feature cell '" + cell + "' at " +
                                location(line_no, c, header[c]));
            features.push_back(value);
        }
    }
    if (labels.empty())
        throw DataError("'" + path.string() + "' has a header but no data rows");
    if (classes.empty())
        throw DataError("'" + path.string() + "' has no labeled rows and no class levels");
    const auto n_rows = labels.size();
    const auto n_features = feature_names.size();
    return Dataset(n_rows, n_features, std::move(features), std::move(labels),
                   std::move(feature_names), std::move(classes));
}

void write_csv(const Dataset &data, const std::filesystem::path &path,
               const std::string &label_column) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write '" + path.string() + "'");
    for (const auto &name : data.feature_names())
        out << name << ',';
    out << label_column << '\n';
    char buffer[64];
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_features(); ++j) {
            const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, data.at(i, j));
            out.write(buffer, ptr - buffer);
            out << ',';
        }
        if (const auto &label = data.label(i))
            out << data.class_names()[static_cast<std::size_t>(*label)];
        out << '\n';
    }
    if (!out)
        throw DataError("failed writing '" + path.string() + "'");
}

Dataset generate_binomial(std::size_t n_rows, std::span<const double> coefficients, double intercept,
                          std::uint64_t seed) {
    if (n_rows == 0)
        throw DataError("generate_binomial: n_rows must be positive");
    if (coefficients.empty())
        throw DataError("generate_binomial: need at least one coefficient");
    for (double c : coefficients)
        if (!std::isfinite(c))
            throw DataError("generate_binomial: coefficients must be finite");
    if (!std::isfinite(intercept))
        throw DataError("generate_binomial: intercept must be finite");

    const std::size_t p = coefficients.size();
    Rng rng(seed);
    std::vector<double> features(n_rows * p);
    std::vector<std::optional<int>> labels(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        double eta = intercept;
        for (std::size_t j = 0; j < p; ++j) {
            const double x = rng.normal();
            features[i * p + j] = x;
            eta += coefficients[j] * x;
        }
        const double prob = 1.0 / (1.0 + std::exp(-eta));
        labels[i] = rng.bernoulli(prob) ? 1 : 0;
    }
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j)
        names.push_back("x" + std::to_string(j + 1));
    return Dataset(n_rows, p, std::move(features), std::move(labels), std::move(names), {"0", "1"});
}

SplitState make_split(const Dataset &data, double unlabeled_fraction, double test_fraction,
                      std::uint64_t seed) {
    if (!(unlabeled_fraction >= 0.0 && unlabeled_fraction < 1.0))
        throw DataError("unlabeled_fraction must lie in [0, 1)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw DataError("test_fraction must lie in (0, 1)");

    const int n_classes = data.class_count();
    SplitState split;
    split.rng_seed = seed;

    std::vector<std::size_t> labeled_rows;
    std::vector<std::size_t> class_sizes(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        if (const auto &y = data.label(i)) {
            labeled_rows.push_back(i);
            ++class_sizes[static_cast<std::size_t>(*y)];
        } else {
            split.unlabeled_idx.push_back(i);
        }
    }
    for (int c = 0; c < n_classes; ++c)
        if (class_sizes[static_cast<std::size_t>(c)] == 0)
            throw DataError("class '" + data.class_names()[static_cast<std::size_t>(c)] +
                            "' has no labeled rows; cannot stratify");

    const std::size_t n = labeled_rows.size();
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_test;
    const auto n_unlabeled =
        static_cast<std::size_t>(std::llround(unlabeled_fraction * static_cast<double>(n_train)));
    const std::size_t n_labeled = n_train - n_unlabeled;
    if (n_test >= n || n_labeled < static_cast<std::size_t>(n_classes))
        throw DataError("split infeasible: " + std::to_string(n_labeled) +
                        " labeled rows would remain for " + std::to_string(n_classes) + " classes");

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> by_class;
    std::vector<std::size_t> order;
    constexpr int kMaxAttempts = 100;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
        order = labeled_rows;
        rng.shuffle(std::span<std::size_t>(order));
        by_class.assign(static_cast<std::size_t>(n_classes), {});
        for (std::size_t k = n_test; k < n; ++k)
            by_class[static_cast<std::size_t>(*data.label(order[k]))].push_back(order[k]);
        ok = std::all_of(by_class.begin(), by_class.end(), [](const auto &g) { return !g.empty(); });
    }
    if (!ok)
        throw DataError("could not draw a training portion containing every class");

    // Proportional quota per class, at least one each, largest remainder first.
    std::vector<std::size_t> quota(static_cast<std::size_t>(n_classes));
    std::vector<double> remainder(quota.size());
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < quota.size(); ++c) {
        const double exact = static_cast<double>(n_labeled) * static_cast<double>(by_class[c].size()) /
                             static_cast<double>(n_train);
        quota[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(exact)));
        quota[c] = std::min(quota[c], by_class[c].size());
        remainder[c] = exact - std::floor(exact);
        assigned += quota[c];
    }
    std::vector<std::size_t> classes(quota.size());
    std::iota(classes.begin(), classes.end(), 0);
    std::stable_sort(classes.begin(), classes.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    while (assigned < n_labeled) {
        bool progressed = false;
        for (auto c : classes) {
            if (assigned == n_labeled)
                break;
            if (quota[c] < by_class[c].size()) {
                ++quota[c];
                ++assigned;
                progressed = true;
            }
        }
        if (!progressed)
            break;
    }
    while (assigned > n_labeled) {
        const auto largest = std::max_element(quota.begin(), quota.end());
        --*largest;
        --assigned;
    }

    split.test_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const auto &group = by_class[c];
        split.labeled_idx.insert(split.labeled_idx.end(), group.begin(),
                                 group.begin() + static_cast<std::ptrdiff_t>(quota[c]));
        split.unlabeled_idx.insert(split.unlabeled_idx.end(),
                                   group.begin() + static_cast<std::ptrdiff_t>(quota[c]), group.end());
    }
    std::sort(split.labeled_idx.begin(), split.labeled_idx.end());
    std::sort(split.unlabeled_idx.begin(), split.unlabeled_idx.end());
    std::sort(split.test_idx.begin(), split.test_idx.end());
    return split;
}

LabeledView training_view(const Dataset &data, const SplitState &split) {
    LabeledView view{&data, {}, {}};
    for (auto i : split.labeled_idx)
        view.push_back(i, *data.label(i));
    return view;
}

PoolView pool_view(const Dataset &data, const SplitState &split) {
    return PoolView{&data, split.unlabeled_idx};
}

LabeledView test_view(const Dataset &data, const SplitState &split) {
    LabeledView view{&data, {}, {}};
    for (auto i : split.test_idx)
        view.push_back(i, *data.label(i));
    return view;
}

} // namespace rpls
