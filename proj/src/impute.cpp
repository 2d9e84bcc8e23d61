#include "missarf/impute.hpp"

#include <algorithm>
#include <cmath>

#include "missarf/model_io.hpp"
#include "missarf/parallel.hpp"

namespace missarf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kFitStream = 0x464954;
constexpr std::uint64_t kDrawStream = 0x44524157;

std::size_t pick_entry(const AdjustedWeights& aw, double u) {
    double cum = 0.0;
    for (std::size_t e = 0; e < aw.entries.size(); ++e) {
        cum += aw.entries[e].weight;
        if (u <= cum) return e;
    }
    return aw.entries.size() - 1;
}

Cell sample_fallback_feature(const DensityModel& model, std::size_t j, Rng& rng) {
    const auto& summary = model.column_summary(j);
    if (model.schema()[j].kind == ColumnKind::numeric) {
        if (summary.observed == 0) return Cell::number(0.0);
        if (summary.min == summary.max) return Cell::number(summary.min);
        return Cell::number(rng.uniform(summary.min, summary.max));
    }
    if (summary.observed == 0) return Cell::category(0);
    const double u = rng.uniform01();
    double cum = 0.0;
    std::int32_t last = 0;
    for (std::size_t c = 0; c < summary.freq.size(); ++c) {
        if (summary.freq[c] <= 0.0) continue;
        last = static_cast<std::int32_t>(c);
        cum += summary.freq[c];
        if (u <= cum) return Cell::category(last);
    }
    return Cell::category(last);
}

Cell expectation_fallback_feature(const DensityModel& model, std::size_t j) {
    const auto& summary = model.column_summary(j);
    if (model.schema()[j].kind == ColumnKind::numeric) {
        return Cell::number(summary.observed > 0 ? summary.mean : 0.0);
    }
    return Cell::category(summary.mode >= 0 ? summary.mode : 0);
}

std::vector<Cell> sample_from_weights(const DensityModel& model, const ImputationTask& task,
                                      const AdjustedWeights& aw, Rng& rng) {
    std::vector<Cell> out = task.values;
    if (aw.fallback()) {
        for (std::size_t j : task.missing) out[j] = sample_fallback_feature(model, j, rng);
        return out;
    }
    const std::size_t entry = pick_entry(aw, rng.uniform01());
    const std::size_t leaf = static_cast<std::size_t>(aw.entries[entry].leaf);
    for (std::size_t j : task.missing) out[j] = sample_leaf_feature(model, leaf, j, rng);
    return out;
}

std::vector<Cell> expectation_from_weights(const DensityModel& model, const ImputationTask& task,
                                           const AdjustedWeights& aw, NumericMean mean_kind) {
    std::vector<Cell> out = task.values;
    if (aw.fallback()) {
        for (std::size_t j : task.missing) out[j] = expectation_fallback_feature(model, j);
        return out;
    }
    for (std::size_t j : task.missing) {
        if (model.schema()[j].kind == ColumnKind::numeric) {
            double value = 0.0;
            for (const auto& entry : aw.entries) {
                const auto& tn =
                    model.density(static_cast<std::size_t>(entry.leaf)).numeric[model.numeric_ordinal(j)];
                const double leaf_mean =
                    mean_kind == NumericMean::truncated_mean ? truncnorm_mean(tn) : tn.mu;
                value += entry.weight * leaf_mean;
            }
            out[j] = Cell::number(value);
        } else {
            std::vector<double> score(model.schema()[j].categories.size(), 0.0);
            for (const auto& entry : aw.entries) {
                const auto& probs =
                    model.density(static_cast<std::size_t>(entry.leaf))
                        .categorical[model.categorical_ordinal(j)];
                for (std::size_t c = 0; c < score.size(); ++c)
                    score[c] += entry.weight * probs[c];
            }
            std::size_t best = 0;
            for (std::size_t c = 1; c < score.size(); ++c) {
                if (score[c] > score[best]) best = c;
            }
            out[j] = Cell::category(static_cast<std::int32_t>(best));
        }
    }
    return out;
}

}  // namespace

ImputationTask make_task(const Dataset& data, std::size_t row) {
    ImputationTask task;
    task.row = row;
    task.values.resize(data.n_cols());
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        task.values[j] = data.cell(row, j);
        (task.values[j].is_missing() ? task.missing : task.observed).push_back(j);
    }
    return task;
}

AdjustedWeights adjusted_weights(const DensityModel& model, const ImputationTask& task) {
    AdjustedWeights aw;
    std::vector<double> log_terms;
    log_terms.reserve(64);
    double max_term = -kInf;
    for (std::size_t l = 0; l < model.n_leaves(); ++l) {
        const double w = model.leaf(l).weight;
        if (!(w > 0.0)) continue;
        double lw = std::log(w);
        for (std::size_t j : task.observed) {
            lw += model.feature_log_density(l, j, task.values[j]);
            if (lw == -kInf) break;
        }
        if (lw == -kInf) continue;
        aw.entries.push_back({static_cast<std::int32_t>(l), lw});
        log_terms.push_back(lw);
        max_term = std::max(max_term, lw);
    }
    if (aw.entries.empty()) return aw;  // fallback signal

    double sum = 0.0;
    for (double t : log_terms) sum += std::exp(t - max_term);
    aw.log_marginal = max_term + std::log(sum);
    for (auto& entry : aw.entries) entry.weight = std::exp(entry.weight - aw.log_marginal);
    // Exact renormalization of the residual floating-point error.
    double total = 0.0;
    for (const auto& entry : aw.entries) total += entry.weight;
    for (auto& entry : aw.entries) entry.weight /= total;
    return aw;
}

std::vector<Cell> impute_row_sample(const DensityModel& model, const ImputationTask& task,
                                    Rng rng) {
    if (task.missing.empty()) throw DataError("impute_row_sample: row has no missing cells");
    const AdjustedWeights aw = adjusted_weights(model, task);
    return sample_from_weights(model, task, aw, rng);
}

std::vector<Cell> impute_row_expectation(const DensityModel& model, const ImputationTask& task,
                                         NumericMean mean_kind) {
    if (task.missing.empty()) throw DataError("impute_row_expectation: row has no missing cells");
    const AdjustedWeights aw = adjusted_weights(model, task);
    return expectation_from_weights(model, task, aw, mean_kind);
}

ImputedSet impute_dataset(const Dataset& data, const ImputationConfig& cfg, const Rng& rng,
                          unsigned threads) {
    if (data.n_rows() < 2) throw DataError("impute_dataset: need at least two rows");
    if (cfg.mode == ImputeMode::multiple && cfg.m < 1)
        throw ConfigError("impute_dataset: m must be at least 1");

    ImputedSet result;
    result.config = cfg;

    bool any_usable = false;
    for (std::size_t j = 0; j < data.n_cols(); ++j) {
        bool observed = false;
        for (std::size_t i = 0; i < data.n_rows() && !observed; ++i)
            observed = !data.is_missing(i, j);
        if (observed) {
            any_usable = true;
        } else {
            result.warnings.push_back("column '" + data.column_schema(j).name +
                                      "' has no observed values; imputing from defaults");
        }
    }
    if (!any_usable) throw DataError("impute_dataset: no column has observed values");

    ForestHyperparams hp;
    hp.n_trees = cfg.trees;
    hp.min_node_size = cfg.min_node_size;
    hp.mtry = cfg.mtry;
    auto [forest, report] =
        adversarial_fit(data, hp, cfg.delta, cfg.max_iters, rng.derive(kFitStream), threads);
    const auto leaves = extract_leaves(forest, data);
    const DensityModel model =
        fit_leaf_densities(forest, leaves, data, DensityFitParams{cfg.alpha});
    result.fit_report = std::move(report);
    result.model_fingerprint = model_fingerprint(model);

    const std::size_t n_out = cfg.n_outputs();
    result.datasets.assign(n_out, data);

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        for (std::size_t j = 0; j < data.n_cols(); ++j) {
            if (data.is_missing(i, j)) {
                rows.push_back(i);
                break;
            }
        }
    }

    parallel_for(rows.size(), threads, [&](std::size_t idx) {
        const std::size_t row = rows[idx];
        const ImputationTask task = make_task(data, row);
        // The adjusted weights are shared by all m draws; only the leaf draw
        // and the feature sampling are repeated per imputation.
        const AdjustedWeights aw = adjusted_weights(model, task);
        if (cfg.mode == ImputeMode::single_expectation) {
            const auto cells = expectation_from_weights(model, task, aw, cfg.mean_kind);
            for (std::size_t j : task.missing) result.datasets[0].set(row, j, cells[j]);
            return;
        }
        for (std::size_t imp = 0; imp < n_out; ++imp) {
            Rng draw_rng = rng.derive(kDrawStream, row).derive(imp);
            const auto cells = sample_from_weights(model, task, aw, draw_rng);
            for (std::size_t j : task.missing) result.datasets[imp].set(row, j, cells[j]);
        }
    });

    return result;
}

Dataset reduce_to_single(const std::vector<Dataset>& imputations) {
    if (imputations.empty()) throw DataError("reduce_to_single: no datasets");
    Dataset out = imputations.front();
    const std::size_t m = imputations.size();
    for (std::size_t j = 0; j < out.n_cols(); ++j) {
        for (std::size_t i = 0; i < out.n_rows(); ++i) {
            if (out.is_numeric(j)) {
                double sum = 0.0;
                for (const auto& d : imputations) {
                    const double v = d.number(i, j);
                    if (std::isnan(v)) throw DataError("reduce_to_single: dataset has missing cells");
                    sum += v;
                }
                out.set_number(i, j, sum / static_cast<double>(m));
            } else {
                std::vector<std::size_t> counts(out.column_schema(j).categories.size(), 0);
                for (const auto& d : imputations) {
                    const std::int32_t c = d.category(i, j);
                    if (c < 0) throw DataError("reduce_to_single: dataset has missing cells");
                    ++counts[static_cast<std::size_t>(c)];
                }
                std::size_t best = 0;
                for (std::size_t c = 1; c < counts.size(); ++c) {
                    if (counts[c] > counts[best]) best = c;
                }
                out.set_category(i, j, static_cast<std::int32_t>(best));
            }
        }
    }
    return out;
}

}  // namespace missarf
