#include "missarf/simbench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "missarf/parallel.hpp"
#include "missarf/stats_math.hpp"

namespace missarf {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(Marginal m) {
    switch (m) {
        case Marginal::normal: return "normal";
        case Marginal::binom: return "binom";
        case Marginal::pois: return "pois";
        case Marginal::gamma: return "gamma";
        case Marginal::uniform: return "uniform";
    }
    return "?";
}

std::string to_string(EffectKind e) { return e == EffectKind::linear ? "linear" : "squared"; }

std::string to_string(Mechanism m) {
    switch (m) {
        case Mechanism::MCAR: return "MCAR";
        case Mechanism::MAR: return "MAR";
        case Mechanism::MNAR: return "MNAR";
    }
    return "?";
}

std::string to_string(BenchMethod m) {
    switch (m) {
        case BenchMethod::missarf: return "missarf";
        case BenchMethod::median: return "median";
        case BenchMethod::random: return "random";
    }
    return "?";
}

Marginal marginal_from_string(const std::string& s) {
    if (s == "normal") return Marginal::normal;
    if (s == "binom" || s == "binary") return Marginal::binom;
    if (s == "pois" || s == "poisson") return Marginal::pois;
    if (s == "gamma") return Marginal::gamma;
    if (s == "uniform") return Marginal::uniform;
    throw ConfigError("unknown marginal '" + s + "'");
}

EffectKind effect_from_string(const std::string& s) {
    if (s == "linear") return EffectKind::linear;
    if (s == "squared") return EffectKind::squared;
    throw ConfigError("unknown effect '" + s + "'");
}

Mechanism mechanism_from_string(const std::string& s) {
    if (s == "MCAR" || s == "mcar") return Mechanism::MCAR;
    if (s == "MAR" || s == "mar") return Mechanism::MAR;
    if (s == "MNAR" || s == "mnar") return Mechanism::MNAR;
    throw ConfigError("unknown mechanism '" + s + "'");
}

namespace {

double marginal_quantile(Marginal m, double u) {
    switch (m) {
        case Marginal::normal: return stats::normal_quantile(u);
        case Marginal::binom: return static_cast<double>(stats::bernoulli_quantile(u, 0.5));
        case Marginal::pois: return static_cast<double>(stats::poisson_quantile(u, 2.0));
        case Marginal::gamma: return stats::gamma_quantile(u, 2.0, 0.5);
        case Marginal::uniform: return -1.0 + 2.0 * u;
    }
    throw ConfigError("unknown marginal");
}

}  // namespace

Dataset simulate_features(const SimSpec& spec, Rng rng) {
    if (spec.p < 2) throw ConfigError("simulate_features: p must be at least 2");
    if (spec.n < 10) throw ConfigError("simulate_features: n must be at least 10");

    const std::size_t p = spec.p;
    Eigen::MatrixXd corr(p, p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            corr(i, j) = std::pow(spec.rho, std::abs(static_cast<double>(i) -
                                                     static_cast<double>(j)));
        }
    }
    const Eigen::MatrixXd chol = corr.llt().matrixL();

    std::vector<ColumnSchema> schema(p);
    for (std::size_t j = 0; j < p; ++j) schema[j] = {"x" + std::to_string(j + 1), ColumnKind::numeric, {}};
    Dataset out(schema, spec.n);

    Eigen::VectorXd eps(p);
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < p; ++j) eps(j) = rng.normal();
        const Eigen::VectorXd z = chol * eps;
        for (std::size_t j = 0; j < p; ++j) {
            double x;
            if (spec.marginal == Marginal::normal) {
                x = z(j);  // Phi^{-1}(Phi(z)) is the identity
            } else {
                x = marginal_quantile(spec.marginal, stats::normal_cdf(z(j)));
            }
            out.set_number(i, j, x);
        }
    }
    return out;
}

std::vector<double> effect_coefficients(std::size_t p) {
    if (p < 2) throw ConfigError("effect_coefficients: p must be at least 2");
    std::vector<double> beta(p);
    for (std::size_t j = 0; j < p; ++j) {
        beta[j] = -0.5 + static_cast<double>(j) / static_cast<double>(p - 1);
    }
    return beta;
}

std::vector<int> simulate_outcome(const Dataset& features, EffectKind effect, Rng rng) {
    const std::size_t p = features.n_cols();
    for (std::size_t j = 0; j < p; ++j) {
        if (!features.is_numeric(j))
            throw SchemaError("simulate_outcome: features must be numeric");
    }
    if (features.has_missing()) throw DataError("simulate_outcome: features must be complete");
    const auto beta = effect_coefficients(p);
    std::vector<int> y(features.n_rows());
    for (std::size_t i = 0; i < features.n_rows(); ++i) {
        double eta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double x = features.number(i, j);
            eta += beta[j] * (effect == EffectKind::linear ? x : x * x);
        }
        y[i] = rng.bernoulli(stats::logistic(eta)) ? 1 : 0;
    }
    return y;
}

std::size_t mar_driver_column(std::size_t target, std::size_t p,
                              const std::vector<std::size_t>& targets) {
    std::size_t best = p;
    std::size_t best_dist = p + 1;
    for (std::size_t d = 0; d < p; ++d) {
        if (std::find(targets.begin(), targets.end(), d) != targets.end()) continue;
        const std::size_t dist = d > target ? d - target : target - d;
        if (dist < best_dist) {
            best = d;
            best_dist = dist;
        }
    }
    if (best == p) throw ConfigError("ampute: MAR requires at least one never-amputed column");
    return best;
}

namespace {

double observed_median(const std::vector<double>& column) {
    std::vector<double> values;
    for (double v : column) {
        if (!std::isnan(v)) values.push_back(v);
    }
    if (values.empty()) throw DataError("median of a column with no observed values");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void require_complete_numeric(const Dataset& data, std::size_t j, const char* role) {
    if (!data.is_numeric(j))
        throw ConfigError(std::string("ampute: ") + role + " column '" +
                          data.column_schema(j).name + "' must be numeric");
    for (double v : data.numeric_column(j)) {
        if (std::isnan(v))
            throw DataError(std::string("ampute: ") + role + " column '" +
                            data.column_schema(j).name + "' must be fully observed");
    }
}

}  // namespace

Dataset ampute(const Dataset& data, const AmputeSpec& spec, Rng rng) {
    if (!(spec.proportion > 0.0 && spec.proportion < 1.0))
        throw ConfigError("ampute: proportion must lie in (0, 1)");
    const std::size_t p = data.n_cols();
    std::vector<std::size_t> targets = spec.targets;
    if (targets.empty()) {
        const std::size_t h = (p + 1) / 2;  // first ceil(p/2) columns
        for (std::size_t j = 0; j < h; ++j) targets.push_back(j);
    }
    for (std::size_t j : targets) {
        if (j >= p) throw ConfigError("ampute: target column out of range");
    }

    Dataset out = data;
    const std::size_t n = data.n_rows();
    const double q = spec.proportion;

    for (std::size_t j : targets) {
        if (spec.mechanism == Mechanism::MCAR) {
            for (std::size_t i = 0; i < n; ++i) {
                if (rng.bernoulli(q)) out.set_missing(i, j);
            }
            continue;
        }
        // MAR cuts on a fully observed driver column, MNAR on the target's
        // own pre-amputation values.
        std::size_t cut_col;
        if (spec.mechanism == Mechanism::MAR) {
            cut_col = mar_driver_column(j, p, targets);
            require_complete_numeric(data, cut_col, "MAR driver");
        } else {
            cut_col = j;
            require_complete_numeric(data, cut_col, "MNAR target");
        }
        const double median = observed_median(data.numeric_column(cut_col));
        const bool below_group = rng.bernoulli(0.5);
        std::vector<std::size_t> group;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = data.number(i, cut_col);
            if ((v <= median) == below_group) group.push_back(i);
        }
        if (group.empty()) continue;
        const double rate =
            std::min(1.0, q * static_cast<double>(n) / static_cast<double>(group.size()));
        for (std::size_t i : group) {
            if (rng.bernoulli(rate)) out.set_missing(i, j);
        }
    }
    return out;
}

double nrmse(const Dataset& imputed, const Dataset& truth, const StandardizationParams& params) {
    if (!imputed.same_schema(truth) || imputed.n_rows() != truth.n_rows())
        throw SchemaError("nrmse: datasets do not match");
    for (std::size_t j = 0; j < truth.n_cols(); ++j) {
        if (!truth.is_numeric(j)) throw SchemaError("nrmse: requires numeric datasets");
    }
    if (imputed.has_missing() || truth.has_missing())
        throw DataError("nrmse: datasets must be complete");
    const Dataset a = standardize(imputed, params);
    const Dataset b = standardize(truth, params);
    double ss = 0.0;
    for (std::size_t j = 0; j < truth.n_cols(); ++j) {
        for (std::size_t i = 0; i < truth.n_rows(); ++i) {
            const double d = a.number(i, j) - b.number(i, j);
            ss += d * d;
        }
    }
    return std::sqrt(ss / (static_cast<double>(truth.n_rows()) *
                           static_cast<double>(truth.n_cols())));
}

namespace {

Eigen::MatrixXd design_matrix(const Dataset& features) {
    const std::size_t n = features.n_rows();
    const std::size_t p = features.n_cols();
    Eigen::MatrixXd design(n, p + 1);
    for (std::size_t i = 0; i < n; ++i) {
        design(i, 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (!features.is_numeric(j))
                throw SchemaError("fit_logistic: features must be numeric");
            const double v = features.number(i, j);
            if (std::isnan(v)) throw DataError("fit_logistic: features must be complete");
            design(i, static_cast<Eigen::Index>(j) + 1) = v;
        }
    }
    return design;
}

double clipped_sigma(double eta) {
    const double pi = stats::logistic(eta);
    return std::clamp(pi, 1e-16, 1.0 - 1e-16);
}

double binomial_deviance(const Eigen::VectorXd& eta, const std::vector<int>& y) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const double pi = clipped_sigma(eta(i));
        dev += y[static_cast<std::size_t>(i)] ? std::log(pi) : std::log1p(-pi);
    }
    return -2.0 * dev;
}

}  // namespace

LogisticFit fit_logistic(const Dataset& features, const std::vector<int>& outcome) {
    const std::size_t n = features.n_rows();
    const std::size_t k = features.n_cols() + 1;
    if (outcome.size() != n) throw DataError("fit_logistic: outcome length mismatch");
    if (n <= k) throw DataError("fit_logistic: need more rows than coefficients");

    const Eigen::MatrixXd design = design_matrix(features);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    Eigen::MatrixXd info(k, k);

    LogisticFit fit;
    double prev_dev = kInf;
    for (std::size_t iter = 0; iter < 50; ++iter) {
        const Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd residual(static_cast<Eigen::Index>(n));
        Eigen::VectorXd weight(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < residual.size(); ++i) {
            const double pi = clipped_sigma(eta(i));
            residual(i) = static_cast<double>(outcome[static_cast<std::size_t>(i)]) - pi;
            weight(i) = pi * (1.0 - pi);
        }
        info = design.transpose() * weight.asDiagonal() * design;
        const Eigen::VectorXd step = info.ldlt().solve(design.transpose() * residual);
        if (!step.allFinite()) break;
        beta += step;
        fit.iterations = iter + 1;

        const double dev = binomial_deviance(design * beta, outcome);
        if (!std::isfinite(dev)) {
            beta -= step;
            break;
        }
        if (std::fabs(dev - prev_dev) / (std::fabs(dev) + 0.1) < 1e-10) {
            fit.converged = true;
            prev_dev = dev;
            break;
        }
        prev_dev = dev;
    }

    // Observed-information covariance at the final iterate. Saturated
    // fitted probabilities indicate (quasi-)separation: the MLE does not
    // exist, so the fit is flagged.
    {
        const Eigen::VectorXd eta = design * beta;
        Eigen::VectorXd weight(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < weight.size(); ++i) {
            const double pi = clipped_sigma(eta(i));
            if (pi < 1e-10 || pi > 1.0 - 1e-10) fit.converged = false;
            weight(i) = pi * (1.0 - pi);
        }
        info = design.transpose() * weight.asDiagonal() * design;
    }
    const Eigen::MatrixXd cov =
        info.ldlt().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                                    static_cast<Eigen::Index>(k)));

    fit.deviance = prev_dev;
    fit.beta.resize(k);
    fit.variance.resize(k);
    fit.cov.resize(k * k);
    for (std::size_t a = 0; a < k; ++a) {
        fit.beta[a] = beta(static_cast<Eigen::Index>(a));
        fit.variance[a] = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
        for (std::size_t b = 0; b < k; ++b)
            fit.cov[a * k + b] = cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
    return fit;
}

std::vector<double> predict_probabilities(const LogisticFit& fit, const Dataset& features) {
    if (features.n_cols() + 1 != fit.beta.size())
        throw SchemaError("predict: feature count does not match the fit");
    std::vector<double> probs(features.n_rows());
    for (std::size_t i = 0; i < features.n_rows(); ++i) {
        double eta = fit.beta[0];
        for (std::size_t j = 0; j < features.n_cols(); ++j) {
            const double v = features.number(i, j);
            if (std::isnan(v)) throw DataError("predict: features must be complete");
            eta += fit.beta[j + 1] * v;
        }
        probs[i] = stats::logistic(eta);
    }
    return probs;
}

double brier(const LogisticFit& fit, const Dataset& features, const std::vector<int>& outcome) {
    if (outcome.size() != features.n_rows()) throw DataError("brier: outcome length mismatch");
    const auto probs = predict_probabilities(fit, features);
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double d = probs[i] - static_cast<double>(outcome[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(probs.size());
}

std::vector<PooledEstimate> pool_rubin(const std::vector<std::vector<double>>& estimates,
                                       const std::vector<std::vector<double>>& variances,
                                       double df_complete, double alpha) {
    const std::size_t m = estimates.size();
    if (m < 2) throw ConfigError("pool_rubin: need at least two imputations");
    if (variances.size() != m) throw ConfigError("pool_rubin: estimate/variance count mismatch");
    const std::size_t k = estimates.front().size();
    for (std::size_t i = 0; i < m; ++i) {
        if (estimates[i].size() != k || variances[i].size() != k)
            throw ConfigError("pool_rubin: ragged input");
    }
    if (!(df_complete > 0.0)) throw ConfigError("pool_rubin: complete-data df must be positive");

    std::vector<PooledEstimate> pooled(k);
    const double md = static_cast<double>(m);
    for (std::size_t j = 0; j < k; ++j) {
        auto& po = pooled[j];
        double mean = 0.0, within = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            mean += estimates[i][j];
            within += variances[i][j];
        }
        mean /= md;
        within /= md;
        double between = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = estimates[i][j] - mean;
            between += d * d;
        }
        between /= (md - 1.0);

        po.estimate = mean;
        po.within = within;
        po.between = between;
        po.total_variance = within + (1.0 + 1.0 / md) * between;

        // Barnard-Rubin adjusted degrees of freedom; lambda floored to keep
        // the old-style df finite when the between-variance vanishes.
        const double lambda =
            std::max((1.0 + 1.0 / md) * between / po.total_variance, 1e-4);
        const double df_old = (md - 1.0) / (lambda * lambda);
        const double df_obs =
            (df_complete + 1.0) / (df_complete + 3.0) * df_complete * (1.0 - lambda);
        po.df = df_old * df_obs / (df_old + df_obs);

        const double t = stats::student_t_quantile(1.0 - alpha / 2.0, po.df);
        const double half = t * std::sqrt(po.total_variance);
        po.ci_lo = mean - half;
        po.ci_hi = mean + half;
    }
    return pooled;
}

std::vector<CoverageStats> coverage_stats(const std::vector<std::vector<PooledEstimate>>& pooled,
                                          const std::vector<double>& truth) {
    if (pooled.empty()) throw ConfigError("coverage_stats: no replicates");
    const std::size_t k = truth.size();
    for (const auto& rep : pooled) {
        if (rep.size() != k) throw ConfigError("coverage_stats: ragged replicates");
    }
    std::vector<CoverageStats> out(k);
    const double kd = static_cast<double>(pooled.size());
    for (std::size_t j = 0; j < k; ++j) {
        double covered = 0.0, width = 0.0, ss = 0.0;
        for (const auto& rep : pooled) {
            const auto& po = rep[j];
            covered += (po.ci_lo < truth[j] && truth[j] < po.ci_hi) ? 1.0 : 0.0;
            width += po.ci_hi - po.ci_lo;
            ss += (po.estimate - truth[j]) * (po.estimate - truth[j]);
        }
        out[j] = {covered / kd, width / kd, std::sqrt(ss / kd)};
    }
    return out;
}

ImputedSet baseline_random(const Dataset& data, std::size_t m, Rng rng) {
    if (m < 1) throw ConfigError("baseline_random: m must be at least 1");
    // Observed pools per column.
    std::vector<std::vector<Cell>> pools(data.n_cols());
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            if (!data.is_missing(i, j)) pools[j].push_back(data.cell(i, j));
        }
        if (pools[j].empty())
            throw DataError("baseline_random: column '" + data.column_schema(j).name +
                            "' has no observed values");
    }
    ImputedSet result;
    result.config.mode = m == 1 ? ImputeMode::single_sample : ImputeMode::multiple;
    result.config.m = m;
    result.model_fingerprint = "baseline-random";
    result.datasets.assign(m, data);
    for (std::size_t imp = 0; imp < m; ++imp) {
        for (std::size_t j = 0; j < data.n_cols(); ++j) {
            for (std::size_t i = 0; i < data.n_rows(); ++i) {
                if (data.is_missing(i, j))
                    result.datasets[imp].set(i, j, pools[j][rng.below(pools[j].size())]);
            }
        }
    }
    return result;
}

Dataset baseline_median(const Dataset& data) {
    Dataset out = data;
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        Cell fill;
        if (data.is_numeric(j)) {
            bool any = false;
            for (double v : data.numeric_column(j)) any = any || !std::isnan(v);
            if (!any)
                throw DataError("baseline_median: column '" + data.column_schema(j).name +
                                "' has no observed values");
            fill = Cell::number(observed_median(data.numeric_column(j)));
        } else {
            std::vector<std::size_t> counts(data.column_schema(j).categories.size(), 0);
            std::size_t total = 0;
            for (std::int32_t c : data.categorical_column(j)) {
                if (c >= 0) {
                    ++counts[static_cast<std::size_t>(c)];
                    ++total;
                }
            }
            if (total == 0)
                throw DataError("baseline_median: column '" + data.column_schema(j).name +
                                "' has no observed values");
            std::size_t best = 0;
            for (std::size_t c = 1; c < counts.size(); ++c) {
                if (counts[c] > counts[best]) best = c;
            }
            fill = Cell::category(static_cast<std::int32_t>(best));
        }
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            if (data.is_missing(i, j)) out.set(i, j, fill);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark configuration and runner.

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

template <typename T, typename Parse>
std::vector<T> parse_values(const std::string& value, Parse parse) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(parse(item));
    return out;
}

std::size_t parse_size(const std::string& s) {
    try {
        return static_cast<std::size_t>(std::stoull(s));
    } catch (...) {
        throw ConfigError("expected an integer, got '" + s + "'");
    }
}

double parse_real(const std::string& s) {
    try {
        return std::stod(s);
    } catch (...) {
        throw ConfigError("expected a number, got '" + s + "'");
    }
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
}

}  // namespace

BenchmarkConfig parse_benchmark_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    BenchmarkConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    try {
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError("expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (value.empty()) throw ConfigError("empty value for key '" + key + "'");

            if (key == "setting") {
                if (value == "single") cfg.setting = BenchSetting::single;
                else if (value == "multiple") cfg.setting = BenchSetting::multiple;
                else throw ConfigError("setting must be 'single' or 'multiple'");
            } else if (key == "n") {
                cfg.n_values = parse_values<std::size_t>(value, parse_size);
            } else if (key == "p") {
                cfg.p_values = parse_values<std::size_t>(value, parse_size);
            } else if (key == "marginal") {
                cfg.marginals = parse_values<Marginal>(value, marginal_from_string);
            } else if (key == "effect") {
                cfg.effects = parse_values<EffectKind>(value, effect_from_string);
            } else if (key == "mechanism") {
                cfg.mechanisms = parse_values<Mechanism>(value, mechanism_from_string);
            } else if (key == "proportion") {
                cfg.proportions = parse_values<double>(value, parse_real);
            } else if (key == "methods") {
                cfg.methods = parse_values<BenchMethod>(value, [](const std::string& s) {
                    if (s == "missarf") return BenchMethod::missarf;
                    if (s == "median") return BenchMethod::median;
                    if (s == "random") return BenchMethod::random;
                    throw ConfigError("unknown method '" + s + "'");
                });
            } else if (key == "replicates") {
                cfg.replicates = parse_size(value);
            } else if (key == "m") {
                cfg.m = parse_size(value);
            } else if (key == "trees") {
                cfg.trees = static_cast<std::uint32_t>(parse_size(value));
            } else if (key == "min_node_size") {
                cfg.min_node_size = static_cast<std::uint32_t>(parse_size(value));
            } else if (key == "mtry") {
                cfg.mtry = static_cast<std::uint32_t>(parse_size(value));
            } else if (key == "delta") {
                cfg.delta = parse_real(value);
            } else if (key == "max_iters") {
                cfg.max_iters = parse_size(value);
            } else if (key == "single_mode") {
                if (value == "expectation") cfg.single_mode = ImputeMode::single_expectation;
                else if (value == "sample") cfg.single_mode = ImputeMode::single_sample;
                else throw ConfigError("single_mode must be 'expectation' or 'sample'");
            } else if (key == "mean_kind") {
                if (value == "truncated_mean") cfg.mean_kind = NumericMean::truncated_mean;
                else if (value == "raw_leaf_mean") cfg.mean_kind = NumericMean::raw_leaf_mean;
                else throw ConfigError("mean_kind must be 'truncated_mean' or 'raw_leaf_mean'");
            } else if (key == "alpha") {
                cfg.alpha_smoothing = parse_real(value);
            } else if (key == "impute_with_outcome") {
                cfg.impute_with_outcome = parse_bool(value);
            } else if (key == "seed") {
                cfg.seed = static_cast<std::uint64_t>(parse_size(value));
            } else {
                throw ConfigError("unknown key '" + key + "'");
            }
        }
    } catch (const ConfigError& e) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }

    if (cfg.replicates < 1) throw ConfigError(path + ": replicates must be at least 1");
    for (double q : cfg.proportions) {
        if (!(q > 0.0 && q < 1.0)) throw ConfigError(path + ": proportions must lie in (0, 1)");
    }
    if (cfg.setting == BenchSetting::multiple) {
        if (cfg.m < 2) throw ConfigError(path + ": multiple imputation needs m >= 2");
        for (BenchMethod method : cfg.methods) {
            if (method == BenchMethod::median)
                throw ConfigError(path + ": median imputation cannot produce multiple datasets");
        }
    }
    return cfg;
}

namespace {

struct BenchCell {
    std::size_t n, p;
    Marginal marginal;
    EffectKind effect;
    Mechanism mechanism;
    double proportion;
};

Dataset with_outcome_column(const Dataset& features, const std::vector<int>& y) {
    auto schema = features.schema();
    schema.push_back({"y", ColumnKind::numeric, {}});
    Dataset out(schema, features.n_rows());
    for (std::size_t j = 0; j < features.n_cols(); ++j) {
        for (std::size_t i = 0; i < features.n_rows(); ++i)
            out.set(i, j, features.cell(i, j));
    }
    for (std::size_t i = 0; i < features.n_rows(); ++i)
        out.set_number(i, features.n_cols(), static_cast<double>(y[i]));
    return out;
}

Dataset drop_outcome_column(const Dataset& data) {
    auto schema = data.schema();
    schema.pop_back();
    Dataset out(schema, data.n_rows());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        for (std::size_t i = 0; i < data.n_rows(); ++i) out.set(i, j, data.cell(i, j));
    }
    return out;
}

ImputationConfig make_impute_config(const BenchmarkConfig& cfg, ImputeMode mode) {
    ImputationConfig ic;
    ic.mode = mode;
    ic.m = cfg.m;
    ic.trees = cfg.trees;
    ic.min_node_size = cfg.min_node_size;
    ic.mtry = cfg.mtry;
    ic.delta = cfg.delta;
    ic.max_iters = cfg.max_iters;
    ic.mean_kind = cfg.mean_kind;
    ic.alpha = cfg.alpha_smoothing;
    return ic;
}

// MissARF completion of one amputed dataset; the outcome is stacked as an
// extra feature when requested and stripped afterwards.
std::vector<Dataset> missarf_impute(const BenchmarkConfig& cfg, ImputeMode mode,
                                    const Dataset& amputed, const std::vector<int>& y,
                                    const Rng& rng) {
    const ImputationConfig ic = make_impute_config(cfg, mode);
    if (!cfg.impute_with_outcome) {
        return impute_dataset(amputed, ic, rng).datasets;
    }
    auto result = impute_dataset(with_outcome_column(amputed, y), ic, rng);
    std::vector<Dataset> stripped;
    stripped.reserve(result.datasets.size());
    for (const auto& d : result.datasets) stripped.push_back(drop_outcome_column(d));
    return stripped;
}

std::vector<ResultRow> run_replicate(const BenchmarkConfig& cfg, const BenchCell& cell,
                                     std::size_t replicate, const Rng& rng) {
    std::vector<ResultRow> rows;
    ResultRow base;
    base.n = cell.n;
    base.p = cell.p;
    base.marginal = cell.marginal;
    base.effect = cell.effect;
    base.mechanism = cell.mechanism;
    base.proportion = cell.proportion;
    base.replicate = replicate;

    SimSpec spec{cell.n, cell.p, cell.marginal, cell.effect, 0.5, 0};
    AmputeSpec aspec{cell.mechanism, cell.proportion, {}, 0};

    const Dataset train = simulate_features(spec, rng.derive(1));
    const std::vector<int> y = simulate_outcome(train, cell.effect, rng.derive(2));
    const Dataset train_amp = ampute(train, aspec, rng.derive(3));
    const StandardizationParams params = compute_standardization(train);

    Dataset test = train;
    std::vector<int> y_test;
    Dataset test_amp = train;
    if (cfg.setting == BenchSetting::single) {
        test = simulate_features(spec, rng.derive(4));
        y_test = simulate_outcome(test, cell.effect, rng.derive(5));
        test_amp = ampute(test, aspec, rng.derive(6));
    }

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const BenchMethod method = cfg.methods[mi];
        ResultRow row = base;
        row.method = method;
        const Rng method_rng = rng.derive(7, mi);
        try {
            const auto t0 = std::chrono::steady_clock::now();
            if (cfg.setting == BenchSetting::single) {
                row.m = 1;
                Dataset imp_train = train;
                Dataset imp_test = test;
                switch (method) {
                    case BenchMethod::missarf:
                        imp_train = missarf_impute(cfg, cfg.single_mode, train_amp, y,
                                                   method_rng.derive(0))[0];
                        imp_test = missarf_impute(cfg, cfg.single_mode, test_amp, y_test,
                                                  method_rng.derive(1))[0];
                        break;
                    case BenchMethod::median:
                        imp_train = baseline_median(train_amp);
                        imp_test = baseline_median(test_amp);
                        break;
                    case BenchMethod::random:
                        imp_train = baseline_random(train_amp, 1, method_rng.derive(0))
                                        .datasets[0];
                        imp_test = baseline_random(test_amp, 1, method_rng.derive(1))
                                       .datasets[0];
                        break;
                }
                row.wall_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();

                const double nrmse_value = nrmse(imp_train, train, params);
                const LogisticFit fit = fit_logistic(imp_train, y);
                const double brier_value = brier(fit, imp_test, y_test);
                if (!fit.converged) row.status = "glm_nonconverged";

                row.metric = "nrmse";
                row.value = nrmse_value;
                rows.push_back(row);
                row.metric = "brier";
                row.value = brier_value;
                rows.push_back(row);
            } else {
                row.m = cfg.m;
                std::vector<Dataset> imputations;
                switch (method) {
                    case BenchMethod::missarf:
                        imputations = missarf_impute(cfg, ImputeMode::multiple, train_amp, y,
                                                     method_rng.derive(0));
                        break;
                    case BenchMethod::random:
                        imputations =
                            baseline_random(train_amp, cfg.m, method_rng.derive(0)).datasets;
                        break;
                    case BenchMethod::median:
                        throw ConfigError("median cannot produce multiple imputations");
                }
                row.wall_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();

                std::vector<std::vector<double>> estimates, variances;
                bool all_converged = true;
                for (const auto& d : imputations) {
                    const LogisticFit fit = fit_logistic(d, y);
                    all_converged = all_converged && fit.converged;
                    estimates.push_back(fit.beta);
                    variances.push_back(fit.variance);
                }
                if (!all_converged) row.status = "glm_nonconverged";
                const double df_complete =
                    static_cast<double>(cell.n) - static_cast<double>(cell.p + 1);
                const auto pooled = pool_rubin(estimates, variances, df_complete);
                const auto beta = effect_coefficients(cell.p);

                for (std::size_t j = 0; j < pooled.size(); ++j) {
                    const double truth = j == 0 ? 0.0 : beta[j - 1];
                    row.feature = static_cast<int>(j);
                    row.metric = "covered";
                    row.value =
                        (pooled[j].ci_lo < truth && truth < pooled[j].ci_hi) ? 1.0 : 0.0;
                    rows.push_back(row);
                    row.metric = "ci_width";
                    row.value = pooled[j].ci_hi - pooled[j].ci_lo;
                    rows.push_back(row);
                    row.metric = "coef_sq_error";
                    row.value = (pooled[j].estimate - truth) * (pooled[j].estimate - truth);
                    rows.push_back(row);
                }
            }
        } catch (const std::exception& e) {
            ResultRow err = base;
            err.method = method;
            err.metric = "error";
            err.value = std::numeric_limits<double>::quiet_NaN();
            err.status = std::string("error: ") + e.what();
            rows.push_back(err);
        }
    }
    return rows;
}

}  // namespace

std::vector<ResultRow> run_benchmark(const BenchmarkConfig& cfg, unsigned threads,
                                     const ProgressFn& progress) {
    std::vector<BenchCell> cells;
    for (std::size_t n : cfg.n_values)
        for (std::size_t p : cfg.p_values)
            for (Marginal marg : cfg.marginals)
                for (EffectKind eff : cfg.effects)
                    for (Mechanism mech : cfg.mechanisms)
                        for (double prop : cfg.proportions)
                            cells.push_back({n, p, marg, eff, mech, prop});

    const std::size_t k = cfg.replicates;
    const std::size_t n_tasks = cells.size() * k;
    std::vector<std::vector<ResultRow>> results(n_tasks);
    std::vector<std::atomic<std::size_t>> remaining(cells.size());
    for (auto& r : remaining) r.store(k);
    std::mutex progress_mutex;

    const Rng master(cfg.seed);
    parallel_for(n_tasks, threads, [&](std::size_t task) {
        const std::size_t cell_idx = task / k;
        const std::size_t replicate = task % k;
        const Rng rng = master.derive(cell_idx).derive(replicate);
        results[task] = run_replicate(cfg, cells[cell_idx], replicate, rng);
        if (progress && remaining[cell_idx].fetch_sub(1) == 1) {
            const auto& c = cells[cell_idx];
            std::lock_guard<std::mutex> lock(progress_mutex);
            progress("cell n=" + std::to_string(c.n) + " p=" + std::to_string(c.p) + " " +
                     to_string(c.marginal) + "/" + to_string(c.effect) + " " +
                     to_string(c.mechanism) + " q=" + format_double(c.proportion) + " done");
        }
    });

    std::vector<ResultRow> rows;
    for (auto& r : results) {
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "n,p,marginal,effect,mechanism,proportion,method,m,replicate,metric,feature,"
           "value,status,wall_ms\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.p << ',' << to_string(r.marginal) << ',' << to_string(r.effect)
            << ',' << to_string(r.mechanism) << ',' << format_double(r.proportion) << ','
            << to_string(r.method) << ',' << r.m << ',' << r.replicate << ',' << r.metric << ',';
        if (r.feature >= 0) out << r.feature;
        out << ',';
        if (!std::isnan(r.value)) out << format_double(r.value);
        out << ',' << csv_quote(r.status) << ',' << format_double(r.wall_ms) << '\n';
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace missarf
