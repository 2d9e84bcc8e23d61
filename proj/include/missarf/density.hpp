#pragma once

#include <cstdint>
#include <vector>

#include "missarf/arf.hpp"
#include "missarf/rng.hpp"
#include "missarf/tabular.hpp"

namespace missarf {

// Truncated normal on [lo, hi]. A degenerate normalizer (mass below 1e-300)
// falls back to uniform-on-interval when the interval is finite, otherwise
// the mean is recentered onto the nearest finite bound.
struct TruncatedNormal {
    double mu = 0.0;
    double sigma = 1.0;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    double log_norm = 0.0;  // log(Phi(beta) - Phi(alpha))
    bool uniform_fallback = false;
};

TruncatedNormal make_truncated_normal(double mu, double sigma, double lo, double hi);

double truncnorm_pdf(const TruncatedNormal& tn, double x);
double truncnorm_log_pdf(const TruncatedNormal& tn, double x);
// Inverse CDF; u in (0, 1). Result clamped into the truncation interval.
double truncnorm_quantile(const TruncatedNormal& tn, double u);
double truncnorm_mean(const TruncatedNormal& tn);

inline double truncnorm_pdf(double mu, double sigma, double lo, double hi, double x) {
    return truncnorm_pdf(make_truncated_normal(mu, sigma, lo, hi), x);
}
inline double truncnorm_cdf_inverse(double mu, double sigma, double lo, double hi, double u) {
    return truncnorm_quantile(make_truncated_normal(mu, sigma, lo, hi), u);
}

// Per-feature density parameters for one leaf: a truncated normal per
// numeric column, a probability vector over schema labels per categorical
// column (zero outside the leaf's allowed set).
struct LeafDensity {
    std::vector<TruncatedNormal> numeric;          // indexed by numeric ordinal
    std::vector<std::vector<double>> categorical;  // indexed by categorical ordinal
};

struct DensityFitParams {
    double alpha = 0.0;  // additive smoothing for categorical frequencies
};

// Observed-value summaries of one training column; drives the entire-range
// fallback when no leaf matches a condition.
struct ColumnSummary {
    std::size_t observed = 0;  // observed cell count
    // Numeric columns.
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    // Categorical columns: observed label frequencies (sum 1) and the modal
    // label (ties resolved to the first label in schema order); -1 when the
    // column was never observed.
    std::vector<double> freq;
    std::int32_t mode = -1;
};

// Leaf mixture over the whole forest: geometry, weights and per-leaf
// univariate densities. Self-contained (no reference to the forest);
// immutable and safe to share.
class DensityModel {
  public:
    DensityModel() = default;
    DensityModel(std::vector<ColumnSchema> schema, std::size_t n_trees,
                 std::vector<LeafGeometry> leaves, std::vector<LeafDensity> densities,
                 std::vector<ColumnSummary> columns);

    const std::vector<ColumnSchema>& schema() const { return schema_; }
    std::size_t n_trees() const { return n_trees_; }
    std::size_t n_leaves() const { return leaves_.size(); }
    const std::vector<LeafGeometry>& leaves() const { return leaves_; }
    const LeafGeometry& leaf(std::size_t l) const { return leaves_[l]; }
    const LeafDensity& density(std::size_t l) const { return densities_[l]; }
    const ColumnSummary& column_summary(std::size_t j) const { return columns_[j]; }

    std::size_t numeric_ordinal(std::size_t column) const { return ordinal_[column]; }
    std::size_t categorical_ordinal(std::size_t column) const { return ordinal_[column]; }

    // log p_lj(x_j) for leaf l and column j; -inf outside the leaf's bounds.
    double feature_log_density(std::size_t l, std::size_t column, const Cell& value) const;

  private:
    std::vector<ColumnSchema> schema_;
    std::size_t n_trees_ = 0;
    std::vector<LeafGeometry> leaves_;
    std::vector<LeafDensity> densities_;
    std::vector<ColumnSummary> columns_;
    std::vector<std::size_t> ordinal_;  // column -> per-kind ordinal
};

// Fits a truncated normal (numeric) or multinomial (categorical) to each
// feature in each leaf from the leaf's observed real values. Features never
// observed in a leaf fall back to the full-column observed values truncated
// to the leaf bounds.
DensityModel fit_leaf_densities(const Forest& forest, const std::vector<LeafGeometry>& leaves,
                                const Dataset& real, const DensityFitParams& params = {});

// Log of the leaf-mixture density at a fully observed row; -inf when the
// row lies outside every leaf's support.
double log_density(const DensityModel& model, const std::vector<Cell>& row);
double log_density(const DensityModel& model, const Dataset& data, std::size_t row);

// One draw from leaf l's density for `column`.
Cell sample_leaf_feature(const DensityModel& model, std::size_t l, std::size_t column, Rng& rng);

// Draws: leaf ~ weights, then each feature independently from the leaf
// density. All cells observed.
Dataset sample_unconditional(const DensityModel& model, std::size_t count, Rng rng);

}  // namespace missarf
