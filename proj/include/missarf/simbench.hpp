#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "missarf/impute.hpp"
#include "missarf/rng.hpp"
#include "missarf/tabular.hpp"

namespace missarf {

enum class Marginal { normal, binom, pois, gamma, uniform };
enum class EffectKind { linear, squared };
enum class Mechanism { MCAR, MAR, MNAR };

std::string to_string(Marginal m);
std::string to_string(EffectKind e);
std::string to_string(Mechanism m);
Marginal marginal_from_string(const std::string& s);
EffectKind effect_from_string(const std::string& s);
Mechanism mechanism_from_string(const std::string& s);

// Gaussian-copula simulation cell: n x p features with Toeplitz(rho)
// correlation and a common marginal, plus a binary outcome driven by a
// linear or squared effect.
struct SimSpec {
    std::size_t n = 1000;
    std::size_t p = 4;
    Marginal marginal = Marginal::normal;
    EffectKind effect = EffectKind::linear;
    double rho = 0.5;
    std::uint64_t seed = 42;
};

struct AmputeSpec {
    Mechanism mechanism = Mechanism::MCAR;
    double proportion = 0.2;
    std::vector<std::size_t> targets;  // empty -> first ceil(p/2) columns
    std::uint64_t seed = 42;
};

// Draw correlated uniforms through a Gaussian copula and push them through
// the marginal's quantile function. Columns are named x1..xp.
Dataset simulate_features(const SimSpec& spec, Rng rng);

// Equidistant effects beta = (-0.5, ..., 0.5); pi = sigma(x beta) for the
// linear effect, sigma(x^2 beta) for the squared one.
std::vector<double> effect_coefficients(std::size_t p);
std::vector<int> simulate_outcome(const Dataset& features, EffectKind effect, Rng rng);

// Introduces missingness into the target columns at overall rate
// `proportion` per column. MAR/MNAR confine removals to one side of a
// median cut (driver column for MAR, the column itself for MNAR), adjusting
// the within-group rate when the requested rate exceeds the group size.
Dataset ampute(const Dataset& data, const AmputeSpec& spec, Rng rng);
std::size_t mar_driver_column(std::size_t target, std::size_t p,
                              const std::vector<std::size_t>& targets);

// Root mean squared difference of the standardized matrices over all cells;
// both datasets standardized with the same reference parameters.
double nrmse(const Dataset& imputed, const Dataset& truth, const StandardizationParams& params);

struct LogisticFit {
    std::vector<double> beta;      // intercept first
    std::vector<double> variance;  // diagonal of the covariance
    std::vector<double> cov;       // row-major (p+1)^2
    bool converged = false;
    std::size_t iterations = 0;
    double deviance = 0.0;
};

// Newton/IRLS logistic regression with intercept; converges when the
// relative deviance change falls below 1e-10 (at most 50 iterations).
// Separation or a singular information matrix yields converged=false with
// the last iterate.
LogisticFit fit_logistic(const Dataset& features, const std::vector<int>& outcome);

std::vector<double> predict_probabilities(const LogisticFit& fit, const Dataset& features);

double brier(const LogisticFit& fit, const Dataset& features, const std::vector<int>& outcome);

struct PooledEstimate {
    double estimate = 0.0;
    double within = 0.0;
    double between = 0.0;
    double total_variance = 0.0;
    double df = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

// Rubin's rules over m fits: pooled mean, within/between variance, total
// variance W + (1 + 1/m) B, Barnard-Rubin adjusted degrees of freedom with
// complete-data df `df_complete`, and t confidence intervals at level
// 1 - alpha.
std::vector<PooledEstimate> pool_rubin(const std::vector<std::vector<double>>& estimates,
                                       const std::vector<std::vector<double>>& variances,
                                       double df_complete, double alpha = 0.05);

struct CoverageStats {
    double coverage = 0.0;
    double avg_width = 0.0;
    double rmse = 0.0;
};

// Per-feature coverage rate, mean CI width, and coefficient RMSE over
// replicates.
std::vector<CoverageStats> coverage_stats(const std::vector<std::vector<PooledEstimate>>& pooled,
                                          const std::vector<double>& truth);

// Each missing cell drawn uniformly from the column's observed values,
// repeated m times.
ImputedSet baseline_random(const Dataset& data, std::size_t m, Rng rng);

// Observed median (numeric) or mode (categorical) per column.
Dataset baseline_median(const Dataset& data);

enum class BenchMethod { missarf, median, random };
enum class BenchSetting { single, multiple };

std::string to_string(BenchMethod m);

struct BenchmarkConfig {
    BenchSetting setting = BenchSetting::single;
    std::vector<std::size_t> n_values{1000};
    std::vector<std::size_t> p_values{4};
    std::vector<Marginal> marginals{Marginal::normal};
    std::vector<EffectKind> effects{EffectKind::linear};
    std::vector<Mechanism> mechanisms{Mechanism::MCAR};
    std::vector<double> proportions{0.2};
    std::vector<BenchMethod> methods{BenchMethod::missarf};
    std::size_t replicates = 1;
    std::size_t m = 20;
    std::uint32_t trees = 100;
    std::uint32_t min_node_size = 10;
    std::uint32_t mtry = 0;
    double delta = 0.0;
    std::size_t max_iters = 10;
    ImputeMode single_mode = ImputeMode::single_expectation;
    NumericMean mean_kind = NumericMean::truncated_mean;
    double alpha_smoothing = 0.0;
    bool impute_with_outcome = false;
    std::uint64_t seed = 42;
};

BenchmarkConfig parse_benchmark_config(const std::string& path);

struct ResultRow {
    std::size_t n = 0;
    std::size_t p = 0;
    Marginal marginal = Marginal::normal;
    EffectKind effect = EffectKind::linear;
    Mechanism mechanism = Mechanism::MCAR;
    double proportion = 0.0;
    BenchMethod method = BenchMethod::missarf;
    std::size_t m = 1;
    std::size_t replicate = 0;
    std::string metric;
    int feature = -1;  // -1 blank; 0 intercept; 1..p features
    double value = 0.0;
    std::string status = "ok";
    double wall_ms = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs the full grid; one row per (cell, replicate, metric). Replicate
// seeds derive from (master seed, cell index, replicate index), so output is
// identical across thread counts. Replicate failures land in the status
// column and never abort the grid.
std::vector<ResultRow> run_benchmark(const BenchmarkConfig& cfg, unsigned threads = 1,
                                     const ProgressFn& progress = {});

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);

}  // namespace missarf
