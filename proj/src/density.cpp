#include "missarf/density.hpp"

#include <algorithm>
#include <cmath>

#include "missarf/stats_math.hpp"

namespace missarf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinNormalizer = 1e-300;
constexpr double kSigmaFloorAbs = 1e-9;
constexpr double kSigmaFloorRel = 1e-3;

// Phi(beta) - Phi(alpha), evaluated in whichever tail keeps precision.
double interval_mass(double alpha, double beta) {
    if (alpha > 0.0) return stats::normal_cdf_upper(alpha) - stats::normal_cdf_upper(beta);
    return stats::normal_cdf(beta) - stats::normal_cdf(alpha);
}

struct ColumnMoments {
    double mean = 0.0;
    double sd = 0.0;        // sample SD; 0 when fewer than two distinct values
    std::size_t count = 0;  // observed values
};

ColumnMoments observed_moments(const std::vector<double>& values) {
    ColumnMoments m;
    double sum = 0.0;
    for (double v : values) {
        if (!std::isnan(v)) {
            sum += v;
            ++m.count;
        }
    }
    if (m.count == 0) return m;
    m.mean = sum / static_cast<double>(m.count);
    if (m.count < 2) return m;
    double ss = 0.0;
    for (double v : values) {
        if (!std::isnan(v)) ss += (v - m.mean) * (v - m.mean);
    }
    m.sd = std::sqrt(ss / static_cast<double>(m.count - 1));
    return m;
}

}  // namespace

TruncatedNormal make_truncated_normal(double mu, double sigma, double lo, double hi) {
    if (!(sigma > 0.0)) throw DataError("truncated normal: sigma must be positive");
    if (!(lo < hi)) throw DataError("truncated normal: lo must be below hi");
    TruncatedNormal tn;
    tn.mu = mu;
    tn.sigma = sigma;
    tn.lo = lo;
    tn.hi = hi;
    double mass = interval_mass((lo - mu) / sigma, (hi - mu) / sigma);
    if (mass < kMinNormalizer) {
        if (std::isfinite(lo) && std::isfinite(hi)) {
            tn.uniform_fallback = true;
            tn.log_norm = 0.0;
            return tn;
        }
        // Half-infinite interval: recenter the mean so the interval carries
        // half the mass.
        tn.mu = std::isfinite(lo) ? lo : hi;
        mass = interval_mass((lo - tn.mu) / sigma, (hi - tn.mu) / sigma);
    }
    tn.log_norm = std::log(mass);
    return tn;
}

double truncnorm_log_pdf(const TruncatedNormal& tn, double x) {
    if (x < tn.lo || x > tn.hi) return -kInf;
    if (tn.uniform_fallback) return -std::log(tn.hi - tn.lo);
    const double z = (x - tn.mu) / tn.sigma;
    return stats::normal_log_pdf(z) - std::log(tn.sigma) - tn.log_norm;
}

double truncnorm_pdf(const TruncatedNormal& tn, double x) {
    const double lp = truncnorm_log_pdf(tn, x);
    return lp == -kInf ? 0.0 : std::exp(lp);
}

double truncnorm_quantile(const TruncatedNormal& tn, double u) {
    if (!(u > 0.0 && u < 1.0)) throw DataError("truncnorm_quantile: u outside (0, 1)");
    double x;
    if (tn.uniform_fallback) {
        x = tn.lo + u * (tn.hi - tn.lo);
    } else {
        const double alpha = (tn.lo - tn.mu) / tn.sigma;
        const double beta = (tn.hi - tn.mu) / tn.sigma;
        double z;
        if (alpha > 0.0) {
            // Mirror into the lower tail for precision.
            const double mass = interval_mass(alpha, beta);
            const double p = stats::normal_cdf(-beta) + (1.0 - u) * mass;
            z = -stats::normal_quantile(std::min(p, 1.0 - 1e-16));
        } else {
            const double mass = std::exp(tn.log_norm);
            const double p = stats::normal_cdf(alpha) + u * mass;
            z = stats::normal_quantile(std::min(p, 1.0 - 1e-16));
        }
        x = tn.mu + tn.sigma * z;
    }
    return std::clamp(x, tn.lo, tn.hi);
}

double truncnorm_mean(const TruncatedNormal& tn) {
    if (tn.uniform_fallback) return 0.5 * (tn.lo + tn.hi);
    const double alpha = (tn.lo - tn.mu) / tn.sigma;
    const double beta = (tn.hi - tn.mu) / tn.sigma;
    const double phi_alpha = std::isfinite(alpha) ? stats::normal_pdf(alpha) : 0.0;
    const double phi_beta = std::isfinite(beta) ? stats::normal_pdf(beta) : 0.0;
    return tn.mu + tn.sigma * (phi_alpha - phi_beta) / std::exp(tn.log_norm);
}

DensityModel::DensityModel(std::vector<ColumnSchema> schema, std::size_t n_trees,
                           std::vector<LeafGeometry> leaves, std::vector<LeafDensity> densities,
                           std::vector<ColumnSummary> columns)
    : schema_(std::move(schema)),
      n_trees_(n_trees),
      leaves_(std::move(leaves)),
      densities_(std::move(densities)),
      columns_(std::move(columns)) {
    ordinal_.resize(schema_.size(), 0);
    std::size_t num_ord = 0, cat_ord = 0;
    for (std::size_t j = 0; j < schema_.size(); ++j) {
        ordinal_[j] = schema_[j].kind == ColumnKind::numeric ? num_ord++ : cat_ord++;
    }
}

double DensityModel::feature_log_density(std::size_t l, std::size_t column,
                                         const Cell& value) const {
    const auto& geo = leaves_[l];
    const auto& dens = densities_[l];
    if (schema_[column].kind == ColumnKind::numeric) {
        const double x = value.number();
        // Leaf bounds are half-open (lo, hi] to mirror routing.
        if (!geo.num_bounds[column].contains(x)) return -kInf;
        return truncnorm_log_pdf(dens.numeric[ordinal_[column]], x);
    }
    const std::int32_t c = value.category();
    if (!(geo.allowed[column] & (1ULL << c))) return -kInf;
    const double p = dens.categorical[ordinal_[column]][static_cast<std::size_t>(c)];
    return p > 0.0 ? std::log(p) : -kInf;
}

DensityModel fit_leaf_densities(const Forest& forest, const std::vector<LeafGeometry>& leaves,
                                const Dataset& real, const DensityFitParams& params) {
    if (params.alpha < 0.0) throw ConfigError("fit_leaf_densities: alpha must be nonnegative");
    const std::size_t p = real.n_cols();
    const auto& schema = real.schema();

    // Full-column statistics drive the zero-observation fallbacks, the
    // sigma floor, and the entire-range fallback summaries.
    std::vector<ColumnMoments> global_num(p);
    std::vector<std::vector<double>> global_cat_freq(p);
    std::vector<ColumnSummary> summaries(p);
    for (std::size_t j = 0; j < p; ++j) {
        auto& summary = summaries[j];
        if (real.is_numeric(j)) {
            global_num[j] = observed_moments(real.numeric_column(j));
            summary.observed = global_num[j].count;
            summary.mean = global_num[j].mean;
            summary.min = kInf;
            summary.max = -kInf;
            for (double v : real.numeric_column(j)) {
                if (!std::isnan(v)) {
                    summary.min = std::min(summary.min, v);
                    summary.max = std::max(summary.max, v);
                }
            }
            if (summary.observed == 0) summary.min = summary.max = 0.0;
        } else {
            auto& freq = global_cat_freq[j];
            freq.assign(schema[j].categories.size(), 0.0);
            for (std::int32_t c : real.categorical_column(j)) {
                if (c >= 0) {
                    freq[static_cast<std::size_t>(c)] += 1.0;
                    ++summary.observed;
                }
            }
            summary.freq.assign(freq.size(), 0.0);
            if (summary.observed > 0) {
                double best = 0.0;
                for (std::size_t c = 0; c < freq.size(); ++c) {
                    summary.freq[c] = freq[c] / static_cast<double>(summary.observed);
                    if (freq[c] > best) {
                        best = freq[c];
                        summary.mode = static_cast<std::int32_t>(c);
                    }
                }
            }
        }
    }

    std::vector<LeafDensity> densities(leaves.size());
    std::vector<double> values;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        const auto& geo = leaves[l];
        auto& dens = densities[l];
        for (std::size_t j = 0; j < p; ++j) {
            if (real.is_numeric(j)) {
                const auto& bounds = geo.num_bounds[j];
                const auto& col = real.numeric_column(j);
                values.clear();
                for (std::uint32_t r : geo.row_ids) {
                    const double v = col[r];
                    if (!std::isnan(v)) values.push_back(v);
                }
                double mu, sigma;
                if (values.empty()) {
                    // Feature never observed in this leaf: use the whole
                    // column, truncated to the leaf bounds.
                    const auto& g = global_num[j];
                    mu = g.count > 0 ? g.mean : 0.0;
                    sigma = g.sd;
                } else {
                    const auto m = observed_moments(values);
                    mu = m.mean;
                    sigma = m.sd;
                }
                if (!(sigma > 0.0)) {
                    sigma = std::max(kSigmaFloorAbs, kSigmaFloorRel * global_num[j].sd);
                }
                dens.numeric.push_back(make_truncated_normal(mu, sigma, bounds.lo, bounds.hi));
            } else {
                const std::size_t n_labels = schema[j].categories.size();
                const std::uint64_t allowed = geo.allowed[j];
                const auto& col = real.categorical_column(j);
                std::vector<double> probs(n_labels, 0.0);
                double total = 0.0;
                for (std::uint32_t r : geo.row_ids) {
                    const std::int32_t c = col[r];
                    if (c >= 0) {
                        probs[static_cast<std::size_t>(c)] += 1.0;
                        total += 1.0;
                    }
                }
                std::size_t n_allowed = 0;
                for (std::size_t c = 0; c < n_labels; ++c) {
                    if (allowed & (1ULL << c)) ++n_allowed;
                    else probs[c] = 0.0;  // observed labels always lie in the
                                          // allowed set; clearing is a no-op
                }
                if (total > 0.0) {
                    const double denom = total + params.alpha * static_cast<double>(n_allowed);
                    for (std::size_t c = 0; c < n_labels; ++c) {
                        if (allowed & (1ULL << c)) probs[c] = (probs[c] + params.alpha) / denom;
                    }
                } else {
                    // Whole-column frequencies restricted to the allowed set;
                    // uniform over the allowed set if none were ever observed.
                    double g_total = 0.0;
                    for (std::size_t c = 0; c < n_labels; ++c) {
                        if (allowed & (1ULL << c)) g_total += global_cat_freq[j][c];
                    }
                    for (std::size_t c = 0; c < n_labels; ++c) {
                        if (!(allowed & (1ULL << c))) continue;
                        probs[c] = g_total > 0.0 ? global_cat_freq[j][c] / g_total
                                                 : 1.0 / static_cast<double>(n_allowed);
                    }
                }
                dens.categorical.push_back(std::move(probs));
            }
        }
    }
    return DensityModel(real.schema(), forest.n_trees(), leaves, std::move(densities),
                        std::move(summaries));
}

namespace {

double row_log_density(const DensityModel& model, const std::vector<Cell>& row) {
    std::vector<double> terms;
    terms.reserve(64);
    double max_term = -kInf;
    for (std::size_t l = 0; l < model.n_leaves(); ++l) {
        const double w = model.leaf(l).weight;
        if (!(w > 0.0)) continue;
        double lw = std::log(w);
        for (std::size_t j = 0; j < row.size() && lw > -kInf; ++j) {
            lw += model.feature_log_density(l, j, row[j]);
        }
        if (lw > -kInf) {
            terms.push_back(lw);
            max_term = std::max(max_term, lw);
        }
    }
    if (terms.empty()) return -kInf;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    return max_term + std::log(sum);
}

}  // namespace

double log_density(const DensityModel& model, const std::vector<Cell>& row) {
    if (row.size() != model.schema().size())
        throw SchemaError("log_density: row width does not match schema");
    for (const Cell& c : row) {
        if (c.is_missing()) throw DataError("log_density: row contains missing cells");
    }
    return row_log_density(model, row);
}

double log_density(const DensityModel& model, const Dataset& data, std::size_t row) {
    std::vector<Cell> cells(data.n_cols());
    for (std::size_t j = 0; j < data.n_cols(); ++j) cells[j] = data.cell(row, j);
    return log_density(model, cells);
}

Cell sample_leaf_feature(const DensityModel& model, std::size_t l, std::size_t column, Rng& rng) {
    if (model.schema()[column].kind == ColumnKind::numeric) {
        const auto& tn = model.density(l).numeric[model.numeric_ordinal(column)];
        double x = truncnorm_quantile(tn, rng.uniform01());
        // Keep strictly inside the half-open (lo, hi] routing interval.
        if (std::isfinite(tn.lo) && x <= tn.lo)
            x = std::nextafter(tn.lo, kInf);
        return Cell::number(x);
    }
    const auto& probs = model.density(l).categorical[model.categorical_ordinal(column)];
    const double u = rng.uniform01();
    double cum = 0.0;
    std::int32_t last_positive = -1;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        if (probs[c] <= 0.0) continue;
        cum += probs[c];
        last_positive = static_cast<std::int32_t>(c);
        if (u <= cum) return Cell::category(last_positive);
    }
    if (last_positive < 0) throw DataError("sample: leaf has an empty categorical density");
    return Cell::category(last_positive);
}

Dataset sample_unconditional(const DensityModel& model, std::size_t count, Rng rng) {
    if (count < 1) throw ConfigError("sample_unconditional: count must be positive");
    std::vector<double> cumulative(model.n_leaves());
    double total = 0.0;
    for (std::size_t l = 0; l < model.n_leaves(); ++l) {
        total += model.leaf(l).weight;
        cumulative[l] = total;
    }
    if (!(total > 0.0)) throw DataError("sample_unconditional: all leaf weights are zero");

    Dataset out(model.schema(), count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = rng.uniform01() * total;
        const std::size_t l = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        for (std::size_t j = 0; j < model.schema().size(); ++j) {
            out.set(i, j, sample_leaf_feature(model, l, j, rng));
        }
    }
    return out;
}

}  // namespace missarf
