#include "missarf/arf.hpp"

#include <algorithm>
#include <cmath>

namespace missarf {

Dataset naive_synth(const Dataset& real, Rng rng) {
    if (real.n_rows() < 1) throw DataError("naive_synth: empty dataset");
    const std::size_t n = real.n_rows();
    Dataset out(real.schema(), n);
    for (std::size_t j = 0; j < real.n_cols(); ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src = rng.below(n);
            out.set(i, j, real.cell(src, j));
        }
    }
    return out;
}

Dataset leaf_resample(const Forest& forest, const Dataset& real, Rng rng) {
    const std::size_t n = real.n_rows();
    // Leaves with at least one real bag row, with their cumulative weights.
    struct LeafRef {
        std::size_t tree;
        std::int32_t node;
    };
    std::vector<LeafRef> leaves;
    std::vector<double> cumulative;
    double total = 0.0;
    for (std::size_t t = 0; t < forest.n_trees(); ++t) {
        const double n_t = static_cast<double>(forest.n_real_in_bag(t));
        if (n_t == 0.0) continue;
        const auto& nodes = forest.tree(t).nodes;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto& node = nodes[k];
            if (!node.is_leaf() || node.real_rows.empty()) continue;
            total += static_cast<double>(node.real_rows.size()) /
                     (static_cast<double>(forest.n_trees()) * n_t);
            leaves.push_back({t, static_cast<std::int32_t>(k)});
            cumulative.push_back(total);
        }
    }
    if (leaves.empty()) throw DataError("leaf_resample: forest has no populated leaves");

    Dataset out(real.schema(), n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform01() * total;
        const std::size_t pick = static_cast<std::size_t>(
            std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
        const auto& leaf =
            forest.tree(leaves[pick].tree).nodes[static_cast<std::size_t>(leaves[pick].node)];
        for (std::size_t j = 0; j < real.n_cols(); ++j) {
            const std::uint32_t src = leaf.real_rows[rng.below(leaf.real_rows.size())];
            out.set(i, j, real.cell(src, j));
        }
    }
    return out;
}

namespace {
constexpr std::uint64_t kSynthStream = 0x53594E54;
constexpr std::uint64_t kForestStream = 0x464F5253;
}  // namespace

std::pair<Forest, ArfFitReport> adversarial_fit(const Dataset& real, const ForestHyperparams& hp,
                                                double delta, std::size_t max_iters, const Rng& rng,
                                                unsigned threads) {
    if (real.n_rows() < 2) throw DataError("adversarial_fit: need at least two rows");
    if (delta < 0.0) throw ConfigError("adversarial_fit: delta must be nonnegative");

    ArfFitReport report;
    report.delta = delta;

    Dataset synth = naive_synth(real, rng.derive(kSynthStream, 0));
    Forest forest;
    for (;;) {
        const std::size_t iter = report.iterations;
        forest = fit_forest(real, synth, hp, rng.derive(kForestStream, iter), threads);
        const double acc = oob_accuracy(forest, real, synth, threads);
        report.oob_trace.push_back(acc);
        ++report.iterations;
        if (acc < 0.5 + delta) {
            report.converged = true;
            break;
        }
        if (report.iterations > max_iters) {
            report.converged = false;
            break;
        }
        synth = leaf_resample(forest, real, rng.derive(kSynthStream, report.iterations));
    }
    return {std::move(forest), std::move(report)};
}

std::vector<LeafGeometry> extract_leaves(const Forest& forest, const Dataset& real) {
    const std::size_t p = real.n_cols();
    const auto& schema = real.schema();

    std::vector<std::uint64_t> all_labels(p, 0);
    for (std::size_t j = 0; j < p; ++j) {
        if (schema[j].kind == ColumnKind::categorical) {
            const std::size_t k = schema[j].categories.size();
            all_labels[j] = (k == 64) ? ~0ULL : ((1ULL << k) - 1);
        }
    }

    std::vector<LeafGeometry> leaves(forest.n_leaves());
    const double T = static_cast<double>(forest.n_trees());

    for (std::size_t t = 0; t < forest.n_trees(); ++t) {
        const auto& nodes = forest.tree(t).nodes;
        const double n_t = static_cast<double>(forest.n_real_in_bag(t));

        // Depth-first walk carrying the path conjunction.
        struct Frame {
            std::int32_t node;
            std::vector<Interval> bounds;
            std::vector<std::uint64_t> allowed;
        };
        std::vector<Frame> stack;
        stack.push_back({0, std::vector<Interval>(p), all_labels});
        while (!stack.empty()) {
            Frame frame = std::move(stack.back());
            stack.pop_back();
            const auto& node = nodes[static_cast<std::size_t>(frame.node)];
            if (node.is_leaf()) {
                LeafGeometry geo;
                geo.leaf_id = node.leaf_id;
                geo.tree = static_cast<std::uint32_t>(t);
                geo.node = frame.node;
                geo.num_bounds = std::move(frame.bounds);
                geo.allowed = std::move(frame.allowed);
                geo.weight =
                    n_t > 0.0 ? static_cast<double>(node.real_rows.size()) / (T * n_t) : 0.0;
                geo.row_ids = node.real_rows;
                leaves[static_cast<std::size_t>(node.leaf_id)] = std::move(geo);
                continue;
            }
            const auto& rule = node.rule;
            Frame left{node.left, frame.bounds, frame.allowed};
            Frame right{node.right, std::move(frame.bounds), std::move(frame.allowed)};
            if (rule.is_numeric) {
                auto& li = left.bounds[rule.feature];
                li.hi = std::min(li.hi, rule.threshold);
                auto& ri = right.bounds[rule.feature];
                ri.lo = std::max(ri.lo, rule.threshold);
            } else {
                const std::uint64_t unseen = all_labels[rule.feature] & ~rule.seen_labels;
                std::uint64_t to_left = rule.left_labels;
                std::uint64_t to_right = rule.seen_labels & ~rule.left_labels;
                (rule.missing_left ? to_left : to_right) |= unseen;
                left.allowed[rule.feature] &= to_left;
                right.allowed[rule.feature] &= to_right;
            }
            stack.push_back(std::move(right));
            stack.push_back(std::move(left));
        }
    }

    // Weights form a probability distribution; renormalize only in the
    // degenerate case of a bag without real rows.
    double total = 0.0;
    for (const auto& leaf : leaves) total += leaf.weight;
    if (total > 0.0 && std::fabs(total - 1.0) > 1e-12) {
        for (auto& leaf : leaves) leaf.weight /= total;
    }
    return leaves;
}

}  // namespace missarf
