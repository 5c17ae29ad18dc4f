#include "rpls/glm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rpls/error.hpp"
#include "rpls/kernels.hpp"

namespace rpls::glm {

void validate(const ModelSpec &spec, std::size_t n_features) {
    std::set<std::size_t> seen;
    for (auto c : spec.covariates) {
        if (c >= n_features)
            throw DataError("model " + std::to_string(spec.model_id) + ": covariate index " +
                            std::to_string(c) + " out of range");
        if (!seen.insert(c).second)
            throw DataError("model " + std::to_string(spec.model_id) + ": duplicate covariate " +
                            std::to_string(c));
    }
    if (spec.dim() == 0)
        throw DataError("model " + std::to_string(spec.model_id) + " has no parameters");
}

std::vector<ModelSpec> all_subsets(std::size_t n_features, bool intercept) {
    if (n_features > 10)
        throw DataError("covariate subset enumeration capped at 10 features (2^10 models)");
    std::vector<std::vector<std::size_t>> subsets;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n_features); ++mask) {
        std::vector<std::size_t> subset;
        for (std::size_t j = 0; j < n_features; ++j)
            if (mask & (std::size_t{1} << j))
                subset.push_back(j);
        if (subset.empty() && !intercept)
            continue;
        subsets.push_back(std::move(subset));
    }
    std::stable_sort(subsets.begin(), subsets.end(), [](const auto &a, const auto &b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    std::vector<ModelSpec> specs;
    int id = 1;
    for (auto &subset : subsets)
        specs.push_back(ModelSpec{std::move(subset), intercept, id++});
    return specs;
}

std::vector<ModelSpec> nested_chain(std::size_t n_features, bool intercept) {
    std::vector<ModelSpec> specs;
    int id = 1;
    for (std::size_t size = intercept ? 0 : 1; size <= n_features; ++size) {
        ModelSpec spec{{}, intercept, id++};
        for (std::size_t j = 0; j < size; ++j)
            spec.covariates.push_back(j);
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<std::size_t> coordinates_in(const ModelSpec &sub, const ModelSpec &full) {
    std::vector<std::size_t> out;
    if (sub.intercept) {
        if (!full.intercept)
            throw DataError("model " + std::to_string(sub.model_id) + " has an intercept, model " +
                            std::to_string(full.model_id) + " does not");
        out.push_back(0);
    }
    const std::size_t offset = full.intercept ? 1 : 0;
    for (auto c : sub.covariates) {
        const auto it = std::find(full.covariates.begin(), full.covariates.end(), c);
        if (it == full.covariates.end())
            throw DataError("model " + std::to_string(sub.model_id) + " is not nested in model " +
                            std::to_string(full.model_id));
        out.push_back(offset + static_cast<std::size_t>(it - full.covariates.begin()));
    }
    return out;
}

Design::Design(const LabeledView &view, const ModelSpec &spec)
    : Design(*view.data, view.rows, view.labels, spec) {}

Design::Design(const Dataset &data, std::span<const std::size_t> rows, std::span<const int> labels,
               const ModelSpec &spec)
    : n_(rows.size()), dim_(spec.dim()), spec_(spec) {
    validate(spec, data.n_features());
    if (labels.size() != rows.size())
        throw DataError("design: rows and labels differ in length");
    x_.resize(n_ * dim_);
    y_.resize(n_);
    std::size_t k = 0;
    if (spec.intercept) {
        std::fill_n(x_.begin(), n_, 1.0);
        names_.emplace_back("(intercept)");
        ++k;
    }
    for (auto c : spec.covariates) {
        for (std::size_t i = 0; i < n_; ++i)
            x_[k * n_ + i] = data.at(rows[i], c);
        names_.push_back(data.feature_names()[c]);
        ++k;
    }
    for (std::size_t i = 0; i < n_; ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw DataError("logistic regression needs binary labels (0/1)");
        y_[i] = labels[i];
    }
}

Design Design::with_row(std::span<const double> features, int label) const {
    Design out;
    out.n_ = n_ + 1;
    out.dim_ = dim_;
    out.spec_ = spec_;
    out.names_ = names_;
    out.x_.resize(out.n_ * dim_);
    const auto z = design_row(spec_, features);
    for (std::size_t k = 0; k < dim_; ++k) {
        std::copy_n(x_.begin() + static_cast<std::ptrdiff_t>(k * n_), n_,
                    out.x_.begin() + static_cast<std::ptrdiff_t>(k * out.n_));
        out.x_[k * out.n_ + n_] = z[static_cast<Eigen::Index>(k)];
    }
    out.y_ = y_;
    out.y_.push_back(label);
    return out;
}

namespace {

std::vector<double> linear_predictors(const Design &design, const Eigen::VectorXd &theta) {
    std::vector<double> eta(design.n(), 0.0);
    for (std::size_t k = 0; k < design.dim(); ++k)
        kernels::axpy(theta[static_cast<Eigen::Index>(k)], design.column(k), eta);
    return eta;
}

double log_lik_from_eta(std::span<const double> eta, std::span<const double> y) {
    double sum = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        const double p = clamp_prob(logistic(eta[i]));
        sum += y[i] > 0.5 ? std::log(p) : std::log1p(-p);
    }
    return sum;
}

struct LocalFit {
    double objective;
    double log_lik;
    std::vector<double> eta;
};

LocalFit evaluate(const Design &design, const Eigen::VectorXd &theta, double ridge) {
    auto eta = linear_predictors(design, theta);
    const double ll = log_lik_from_eta(eta, design.response());
    return {ll - 0.5 * ridge * theta.squaredNorm(), ll, std::move(eta)};
}

Eigen::VectorXd score_from_eta(const Design &design, std::span<const double> eta) {
    std::vector<double> residual(design.n());
    const auto y = design.response();
    for (std::size_t i = 0; i < design.n(); ++i)
        residual[i] = y[i] - logistic(eta[i]);
    Eigen::VectorXd g(static_cast<Eigen::Index>(design.dim()));
    for (std::size_t k = 0; k < design.dim(); ++k)
        g[static_cast<Eigen::Index>(k)] = kernels::dot(design.column(k), residual);
    return g;
}

Eigen::MatrixXd information_from_eta(const Design &design, std::span<const double> eta) {
    std::vector<double> w(design.n());
    for (std::size_t i = 0; i < design.n(); ++i) {
        const double p = logistic(eta[i]);
        w[i] = p * (1.0 - p);
    }
    const auto q = static_cast<Eigen::Index>(design.dim());
    Eigen::MatrixXd info(q, q);
    for (Eigen::Index a = 0; a < q; ++a)
        for (Eigen::Index b = 0; b <= a; ++b) {
            const double v = kernels::dot3(design.column(static_cast<std::size_t>(a)), w,
                                           design.column(static_cast<std::size_t>(b)));
            info(a, b) = v;
            info(b, a) = v;
        }
    return info;
}

std::string collinear_columns(const Design &design) {
    const auto n = static_cast<Eigen::Index>(design.n());
    const auto q = static_cast<Eigen::Index>(design.dim());
    Eigen::MatrixXd x(n, q);
    for (Eigen::Index k = 0; k < q; ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            x(i, k) = design.column(static_cast<std::size_t>(k))[static_cast<std::size_t>(i)];
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    std::ostringstream out;
    const auto rank = qr.rank();
    for (Eigen::Index r = rank; r < q; ++r) {
        if (r > rank)
            out << ", ";
        out << design.column_names()[static_cast<std::size_t>(qr.colsPermutation().indices()[r])];
    }
    return rank < q ? out.str() : std::string("(numerically rank-deficient information)");
}

} // namespace

double log_lik_at(const Design &design, const Eigen::VectorXd &theta) {
    if (static_cast<std::size_t>(theta.size()) != design.dim())
        throw DataError("log_lik_at: parameter dimension mismatch");
    return log_lik_from_eta(linear_predictors(design, theta), design.response());
}

double log_lik_at(const LabeledView &view, const ModelSpec &spec, const Eigen::VectorXd &theta) {
    return log_lik_at(Design(view, spec), theta);
}

Eigen::VectorXd score_at(const Design &design, const Eigen::VectorXd &theta) {
    return score_from_eta(design, linear_predictors(design, theta));
}

Eigen::MatrixXd information_at(const Design &design, const Eigen::VectorXd &theta) {
    return information_from_eta(design, linear_predictors(design, theta));
}

ModelFit fit(const LabeledView &view, const ModelSpec &spec, double ridge) {
    if (view.data == nullptr)
        throw DataError("fit: empty view");
    if (view.data->class_count() != 2)
        throw DataError("logistic regression supports exactly two classes, dataset has " +
                        std::to_string(view.data->class_count()));
    FitOptions options;
    options.ridge = ridge;
    auto result = fit(Design(view, spec), spec, options);
    result.n_features = view.data->n_features();
    return result;
}

ModelFit fit(const Design &design, const ModelSpec &spec, const FitOptions &options) {
    if (options.ridge < 0.0)
        throw DataError("ridge must be nonnegative");
    if (design.n() < 2)
        throw DataError("fit needs at least two observations");
    const auto y = design.response();
    const bool has0 = std::any_of(y.begin(), y.end(), [](double v) { return v < 0.5; });
    const bool has1 = std::any_of(y.begin(), y.end(), [](double v) { return v > 0.5; });
    if (!(has0 && has1) && options.ridge == 0.0)
        throw DataError("fit needs both classes present (or ridge > 0)");

    const auto q = static_cast<Eigen::Index>(design.dim());
    Eigen::VectorXd theta = options.start.value_or(Eigen::VectorXd::Zero(q));
    if (theta.size() != q)
        throw DataError("fit: start vector has wrong dimension");
    const Eigen::MatrixXd ridge_id = options.ridge * Eigen::MatrixXd::Identity(q, q);

    auto current = evaluate(design, theta, options.ridge);
    bool converged = false;
    int iteration = 0;
    for (; iteration < options.max_iterations; ++iteration) {
        const Eigen::VectorXd grad = score_from_eta(design, current.eta) - options.ridge * theta;
        if (grad.lpNorm<Eigen::Infinity>() < options.tolerance) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd hessian = information_from_eta(design, current.eta) + ridge_id;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
            if (options.ridge == 0.0)
                throw SingularMatrixError("singular information matrix; collinear columns: " +
                                          collinear_columns(design));
        }
        const Eigen::VectorXd step = ldlt.solve(grad);
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
            Eigen::VectorXd candidate = theta + t * step;
            auto next = evaluate(design, candidate, options.ridge);
            if (std::isfinite(next.objective) &&
                next.objective >= current.objective - roundoff_slack(current.objective)) {
                theta = std::move(candidate);
                current = std::move(next);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No ascent direction left at working precision.
            converged = grad.lpNorm<Eigen::Infinity>() < std::sqrt(options.tolerance);
            break;
        }
    }
    if (!converged && iteration == options.max_iterations) {
        const Eigen::VectorXd grad = score_from_eta(design, current.eta) - options.ridge * theta;
        converged = grad.lpNorm<Eigen::Infinity>() < options.tolerance;
    }

    if (options.ridge == 0.0) {
        double max_eta = 0.0;
        double max_residual = 0.0;
        for (std::size_t i = 0; i < design.n(); ++i) {
            max_eta = std::max(max_eta, std::abs(current.eta[i]));
            max_residual = std::max(max_residual, std::abs(y[i] - logistic(current.eta[i])));
        }
        if (max_eta > 60.0 || max_residual < 1e-6)
            throw SeparationError("quasi-separation detected (|linear predictor| up to " +
                                  std::to_string(max_eta) +
                                  "); the MLE does not exist, refit with ridge > 0");
    }

    ModelFit out;
    out.theta = theta;
    out.log_lik = current.log_lik;
    out.fisher = information_from_eta(design, current.eta);
    out.spec = spec;
    out.converged = converged;
    out.n_obs = design.n();
    out.ridge = options.ridge;
    out.iterations = iteration;
    return out;
}

Eigen::VectorXd design_row(const ModelSpec &spec, std::span<const double> features) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(spec.dim()));
    Eigen::Index k = 0;
    if (spec.intercept)
        z[k++] = 1.0;
    for (auto c : spec.covariates)
        z[k++] = features[c];
    return z;
}

double linear_predictor(const ModelSpec &spec, const Eigen::VectorXd &theta,
                        std::span<const double> features) {
    return design_row(spec, features).dot(theta);
}

double point_log_lik(const ModelSpec &spec, const Eigen::VectorXd &theta,
                     std::span<const double> features, int label) {
    const double p = clamp_prob(logistic(linear_predictor(spec, theta, features)));
    return label == 1 ? std::log(p) : std::log1p(-p);
}

std::array<double, 2> predict_proba(const ModelFit &fit, std::span<const double> features) {
    if (fit.n_features != 0 && features.size() != fit.n_features)
        throw DataError("predict_proba: feature row has " + std::to_string(features.size()) +
                        " values, model expects " + std::to_string(fit.n_features));
    for (auto c : fit.spec.covariates)
        if (c >= features.size())
            throw DataError("predict_proba: feature row too short for model");
    const double p = clamp_prob(logistic(linear_predictor(fit.spec, fit.theta, features)));
    return {1.0 - p, p};
}

double predictive_variance(const Eigen::MatrixXd &fisher, const Eigen::VectorXd &z) {
    Eigen::LLT<Eigen::MatrixXd> llt(fisher);
    if (llt.info() != Eigen::Success)
        throw SingularMatrixError("predictive_variance: information matrix is not positive definite");
    const double v = z.dot(llt.solve(z));
    return std::max(0.0, v);
}

double predictive_variance(const ModelFit &fit, std::span<const double> features) {
    if (fit.n_features != 0 && features.size() != fit.n_features)
        throw DataError("predictive_variance: feature row arity mismatch");
    return predictive_variance(fit.fisher, design_row(fit.spec, features));
}

double log_det_spd(const Eigen::MatrixXd &matrix) {
    Eigen::LLT<Eigen::MatrixXd> llt(matrix);
    if (llt.info() != Eigen::Success)
        throw SingularMatrixError("matrix is not positive definite; log-determinant undefined");
    const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (!(diag[i] > 0.0))
            throw SingularMatrixError("matrix is singular; log-determinant undefined");
        sum += std::log(diag[i]);
    }
    return 2.0 * sum;
}

} // namespace rpls::glm
