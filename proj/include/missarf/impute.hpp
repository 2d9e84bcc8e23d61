#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "missarf/density.hpp"
#include "missarf/rng.hpp"
#include "missarf/tabular.hpp"

namespace missarf {

// One row's imputation problem: observed index set C, missing index set
// C-bar, and the observed values.
struct ImputationTask {
    std::size_t row = 0;
    std::vector<std::size_t> observed;  // C
    std::vector<std::size_t> missing;   // C-bar
    std::vector<Cell> values;           // full row; missing positions hold Cell::missing()
};

ImputationTask make_task(const Dataset& data, std::size_t row);

// Leaf weights conditioned on the observed values: w_l ~ weight_l *
// prod_{j in C} p_lj(x_j), normalized. Leaves whose bounds exclude any
// observed value receive zero weight and are omitted. An empty entry list is
// the fallback signal (no leaf matches the condition).
struct AdjustedWeights {
    struct Entry {
        std::int32_t leaf;
        double weight;
    };
    std::vector<Entry> entries;  // ascending leaf id
    double log_marginal = -std::numeric_limits<double>::infinity();  // log p_ARF(x_C)

    bool fallback() const { return entries.empty(); }
};

AdjustedWeights adjusted_weights(const DensityModel& model, const ImputationTask& task);

enum class ImputeMode { single_expectation, single_sample, multiple };

// Which per-leaf mean enters the conditional expectation for numeric
// features: the mean of the fitted truncated density (default) or the raw
// leaf sample mean.
enum class NumericMean { truncated_mean, raw_leaf_mean };

struct ImputationConfig {
    ImputeMode mode = ImputeMode::single_expectation;
    std::size_t m = 20;  // datasets for multiple imputation
    std::uint32_t trees = 100;
    std::uint32_t min_node_size = 10;
    std::uint32_t mtry = 0;  // 0 -> ceil(sqrt(p))
    double delta = 0.0;
    std::size_t max_iters = 10;
    std::uint64_t seed = 42;
    NumericMean mean_kind = NumericMean::truncated_mean;
    double alpha = 0.0;  // categorical smoothing

    std::size_t n_outputs() const { return mode == ImputeMode::multiple ? m : 1; }
};

struct ImputedSet {
    std::vector<Dataset> datasets;
    ImputationConfig config;
    std::string model_fingerprint;
    ArfFitReport fit_report;
    std::vector<std::string> warnings;
};

// Draw one leaf from the adjusted weights, then each missing feature from
// that leaf's density. On fallback, numeric features are uniform over the
// column's observed range and categorical features follow the observed
// frequencies.
std::vector<Cell> impute_row_sample(const DensityModel& model, const ImputationTask& task,
                                    Rng rng);

// Deterministic completion: numeric features get the weighted leaf means,
// categorical features the weighted-majority label.
std::vector<Cell> impute_row_expectation(const DensityModel& model, const ImputationTask& task,
                                         NumericMean mean_kind = NumericMean::truncated_mean);

// Fits an ARF and leaf densities on `data` once, then completes every row
// with missing values according to the configured mode. Multiple imputation
// redraws the leaf per (row, imputation) from a derived rng stream, so the
// result is independent of scheduling and of m.
ImputedSet impute_dataset(const Dataset& data, const ImputationConfig& cfg, const Rng& rng,
                          unsigned threads = 1);

// Mean (numeric) / mode (categorical) reduction of multiple imputations
// into one dataset.
Dataset reduce_to_single(const std::vector<Dataset>& imputations);

}  // namespace missarf
