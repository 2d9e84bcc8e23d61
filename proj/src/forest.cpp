#include "missarf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "missarf/parallel.hpp"

namespace missarf {

namespace {

struct CellRef {
    bool missing = true;
    double num = 0.0;
    std::int32_t cat = -1;
};

struct ClassCounts {
    double c1 = 0.0;
    double c0 = 0.0;
    double total() const { return c1 + c0; }
};

// Weighted Gini impurity of a two-child partition.
double weighted_gini(const ClassCounts& left, const ClassCounts& right) {
    const double n = left.total() + right.total();
    double score = 0.0;
    for (const auto& child : {left, right}) {
        const double m = child.total();
        if (m > 0.0) {
            const double p1 = child.c1 / m;
            const double p0 = child.c0 / m;
            score += (m / n) * (1.0 - p1 * p1 - p0 * p0);
        }
    }
    return score;
}

bool admissible(const ClassCounts& left, const ClassCounts& right, std::uint32_t min_node_size) {
    return left.total() >= min_node_size && right.total() >= min_node_size;
}

void consider(std::optional<SplitCandidate>& best, const SplitRule& rule, const ClassCounts& left,
              const ClassCounts& right, std::uint32_t min_node_size) {
    if (!admissible(left, right, min_node_size)) return;
    const double score = weighted_gini(left, right);
    if (!best || score < best->score) best = SplitCandidate{rule, score};
}

std::optional<SplitCandidate> best_numeric_split(const Dataset& data,
                                                 const std::vector<std::uint32_t>& rows,
                                                 std::uint32_t feature,
                                                 const std::vector<std::uint8_t>& labels,
                                                 std::uint32_t min_node_size) {
    const auto& col = data.numeric_column(feature);
    std::vector<std::pair<double, std::uint8_t>> observed;
    observed.reserve(rows.size());
    ClassCounts miss, obs;
    for (std::uint32_t r : rows) {
        const double v = col[r];
        if (std::isnan(v)) {
            (labels[r] ? miss.c1 : miss.c0) += 1.0;
        } else {
            observed.emplace_back(v, labels[r]);
            (labels[r] ? obs.c1 : obs.c0) += 1.0;
        }
    }
    if (observed.empty()) return std::nullopt;
    std::sort(observed.begin(), observed.end());

    std::optional<SplitCandidate> best;
    ClassCounts left_obs;
    for (std::size_t i = 0; i + 1 < observed.size(); ++i) {
        (observed[i].second ? left_obs.c1 : left_obs.c0) += 1.0;
        if (observed[i].first == observed[i + 1].first) continue;
        const double mid = 0.5 * (observed[i].first + observed[i + 1].first);
        if (!(mid >= observed[i].first && mid < observed[i + 1].first)) continue;
        const ClassCounts right_obs{obs.c1 - left_obs.c1, obs.c0 - left_obs.c0};
        SplitRule rule;
        rule.feature = feature;
        rule.is_numeric = true;
        rule.threshold = mid;
        // Split A: missing values join the left child.
        rule.missing_left = true;
        consider(best, rule, {left_obs.c1 + miss.c1, left_obs.c0 + miss.c0}, right_obs,
                 min_node_size);
        // Split B: missing values join the right child.
        rule.missing_left = false;
        consider(best, rule, left_obs, {right_obs.c1 + miss.c1, right_obs.c0 + miss.c0},
                 min_node_size);
    }
    if (miss.total() > 0.0) {
        // Observed-versus-missing split: threshold at the largest observed
        // value with the missing group on the right.
        SplitRule rule;
        rule.feature = feature;
        rule.is_numeric = true;
        rule.threshold = observed.back().first;
        rule.missing_left = false;
        consider(best, rule, obs, miss, min_node_size);
    }
    return best;
}

std::optional<SplitCandidate> best_categorical_split(const Dataset& data,
                                                     const std::vector<std::uint32_t>& rows,
                                                     std::uint32_t feature,
                                                     const std::vector<std::uint8_t>& labels,
                                                     std::uint32_t min_node_size) {
    const auto& col = data.categorical_column(feature);
    const std::size_t n_labels = data.column_schema(feature).categories.size();
    std::vector<ClassCounts> counts(n_labels);
    ClassCounts miss;
    for (std::uint32_t r : rows) {
        const std::int32_t c = col[r];
        if (c < 0) {
            (labels[r] ? miss.c1 : miss.c0) += 1.0;
        } else {
            (labels[r] ? counts[c].c1 : counts[c].c0) += 1.0;
        }
    }
    std::vector<std::uint32_t> seen;
    for (std::size_t c = 0; c < n_labels; ++c) {
        if (counts[c].total() > 0.0) seen.push_back(static_cast<std::uint32_t>(c));
    }
    const std::size_t k = seen.size();
    if (k < 2) return std::nullopt;

    std::uint64_t seen_mask = 0;
    for (std::uint32_t c : seen) seen_mask |= (1ULL << c);

    std::optional<SplitCandidate> best;
    auto evaluate_subset = [&](std::uint64_t subset_bits) {
        // subset_bits indexes into `seen`; translate to schema label mask.
        std::uint64_t left_mask = 0;
        ClassCounts left_obs;
        for (std::size_t b = 0; b < k; ++b) {
            if (subset_bits & (1ULL << b)) {
                left_mask |= (1ULL << seen[b]);
                left_obs.c1 += counts[seen[b]].c1;
                left_obs.c0 += counts[seen[b]].c0;
            }
        }
        ClassCounts right_obs;
        for (std::size_t b = 0; b < k; ++b) {
            if (!(subset_bits & (1ULL << b))) {
                right_obs.c1 += counts[seen[b]].c1;
                right_obs.c0 += counts[seen[b]].c0;
            }
        }
        SplitRule rule;
        rule.feature = feature;
        rule.is_numeric = false;
        rule.left_labels = left_mask;
        rule.seen_labels = seen_mask;
        rule.missing_left = true;
        consider(best, rule, {left_obs.c1 + miss.c1, left_obs.c0 + miss.c0}, right_obs,
                 min_node_size);
        rule.missing_left = false;
        consider(best, rule, left_obs, {right_obs.c1 + miss.c1, right_obs.c0 + miss.c0},
                 min_node_size);
    };

    if (k <= 10) {
        // All binary partitions; fixing the first seen label on the left
        // enumerates each partition exactly once.
        const std::uint64_t full = (k == 64) ? ~0ULL : ((1ULL << k) - 1);
        for (std::uint64_t bits = 1; bits < full; bits += 2) evaluate_subset(bits);
    } else {
        // Order labels by class-1 proportion and scan prefix splits.
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double pa = counts[seen[a]].c1 / counts[seen[a]].total();
            const double pb = counts[seen[b]].c1 / counts[seen[b]].total();
            if (pa != pb) return pa < pb;
            return seen[a] < seen[b];
        });
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            bits |= (1ULL << order[i]);
            evaluate_subset(bits);
        }
    }
    return best;
}

bool node_is_pure(const std::vector<std::uint32_t>& rows, const std::vector<std::uint8_t>& labels) {
    const std::uint8_t first = labels[rows.front()];
    for (std::uint32_t r : rows) {
        if (labels[r] != first) return false;
    }
    return true;
}

double node_impurity(const std::vector<std::uint32_t>& rows,
                     const std::vector<std::uint8_t>& labels) {
    double c1 = 0.0;
    for (std::uint32_t r : rows) c1 += labels[r];
    const double n = static_cast<double>(rows.size());
    const double p1 = c1 / n;
    return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1);
}

CellRef get_cell(const Dataset& data, std::size_t row, std::uint32_t j) {
    CellRef ref;
    if (data.is_numeric(j)) {
        const double v = data.numeric_column(j)[row];
        if (!std::isnan(v)) {
            ref.missing = false;
            ref.num = v;
        }
    } else {
        const std::int32_t c = data.categorical_column(j)[row];
        if (c >= 0) {
            ref.missing = false;
            ref.cat = c;
        }
    }
    return ref;
}

bool goes_left(const SplitRule& rule, const CellRef& cell) {
    if (cell.missing) return rule.missing_left;
    if (rule.is_numeric) return cell.num <= rule.threshold;
    const std::uint64_t bit = 1ULL << cell.cat;
    if (rule.left_labels & bit) return true;
    if (rule.seen_labels & bit) return false;
    return rule.missing_left;  // unseen label treated like missingness
}

class TreeBuilder {
  public:
    TreeBuilder(const Dataset& data, const std::vector<std::uint8_t>& labels,
                const ForestHyperparams& hp, std::uint32_t mtry, Rng rng)
        : data_(data), labels_(labels), hp_(hp), mtry_(mtry), rng_(rng) {
        feature_scratch_.resize(data.n_cols());
        std::iota(feature_scratch_.begin(), feature_scratch_.end(), 0u);
    }

    Tree build(std::vector<std::uint32_t> rows) {
        Tree tree;
        grow(tree, std::move(rows));
        return tree;
    }

  private:
    std::int32_t grow(Tree& tree, std::vector<std::uint32_t> rows) {
        const std::int32_t node_idx = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();

        std::optional<SplitCandidate> best;
        if (rows.size() >= 2 * static_cast<std::size_t>(hp_.min_node_size) &&
            !node_is_pure(rows, labels_)) {
            const double parent = node_impurity(rows, labels_);
            for (std::uint32_t f : sample_features()) {
                auto cand = best_split_mia(data_, rows, f, labels_, hp_.min_node_size);
                if (cand && cand->score < parent && (!best || cand->score < best->score))
                    best = cand;
            }
        }

        if (!best) {
            auto& node = tree.nodes[node_idx];
            node.n_total = static_cast<std::uint32_t>(rows.size());
            node.real_rows.reserve(rows.size());
            for (std::uint32_t r : rows) {
                if (r < n_real()) node.real_rows.push_back(r);
            }
            return node_idx;
        }

        std::vector<std::uint32_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (std::uint32_t r : rows) {
            if (goes_left(best->rule, get_cell(data_, r, best->rule.feature))) {
                left_rows.push_back(r);
            } else {
                right_rows.push_back(r);
            }
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[node_idx].rule = best->rule;
        const std::int32_t left = grow(tree, std::move(left_rows));
        tree.nodes[node_idx].left = left;
        const std::int32_t right = grow(tree, std::move(right_rows));
        tree.nodes[node_idx].right = right;
        return node_idx;
    }

    // mtry distinct features, scanned in ascending index order for
    // deterministic tie-breaking.
    std::vector<std::uint32_t> sample_features() {
        const std::size_t p = data_.n_cols();
        std::vector<std::uint32_t> picked;
        picked.reserve(mtry_);
        for (std::uint32_t i = 0; i < mtry_; ++i) {
            const std::size_t j = i + rng_.below(p - i);
            std::swap(feature_scratch_[i], feature_scratch_[j]);
            picked.push_back(feature_scratch_[i]);
        }
        std::sort(picked.begin(), picked.end());
        return picked;
    }

    std::uint32_t n_real() const { return static_cast<std::uint32_t>(labels_.size() / 2); }

    const Dataset& data_;
    const std::vector<std::uint8_t>& labels_;
    const ForestHyperparams& hp_;
    std::uint32_t mtry_;
    Rng rng_;
    std::vector<std::uint32_t> feature_scratch_;
};

}  // namespace

std::uint32_t ForestHyperparams::resolved_mtry(std::size_t p) const {
    if (mtry > 0) return std::min<std::uint32_t>(mtry, static_cast<std::uint32_t>(p));
    return static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(p))));
}

Forest::Forest(std::vector<ColumnSchema> schema, ForestHyperparams hp, std::uint32_t n_real,
               std::vector<Tree> trees, std::vector<std::vector<std::uint32_t>> bags)
    : schema_(std::move(schema)),
      hp_(hp),
      n_real_(n_real),
      trees_(std::move(trees)),
      bags_(std::move(bags)) {
    n_real_in_bag_.resize(bags_.size(), 0);
    for (std::size_t t = 0; t < bags_.size(); ++t) {
        for (std::uint32_t r : bags_[t]) {
            if (r < n_real_) ++n_real_in_bag_[t];
        }
    }
    // Global leaf ids in tree-major, node-index order.
    std::int32_t next_id = 0;
    for (auto& tree : trees_) {
        for (auto& node : tree.nodes) {
            if (node.is_leaf()) node.leaf_id = next_id++;
        }
    }
    n_leaves_ = static_cast<std::size_t>(next_id);
}

std::optional<SplitCandidate> best_split_mia(const Dataset& data,
                                             const std::vector<std::uint32_t>& rows,
                                             std::uint32_t feature,
                                             const std::vector<std::uint8_t>& labels,
                                             std::uint32_t min_node_size) {
    if (rows.empty()) throw DataError("best_split_mia: empty node");
    if (feature >= data.n_cols()) throw SchemaError("best_split_mia: feature out of range");
    if (node_is_pure(rows, labels)) return std::nullopt;
    if (data.is_numeric(feature))
        return best_numeric_split(data, rows, feature, labels, min_node_size);
    return best_categorical_split(data, rows, feature, labels, min_node_size);
}

Forest fit_forest(const Dataset& real, const Dataset& synth, const ForestHyperparams& hp,
                  const Rng& rng, unsigned threads) {
    if (!real.same_schema(synth)) throw SchemaError("fit_forest: real and synthetic schemas differ");
    if (synth.n_rows() != real.n_rows())
        throw SchemaError("fit_forest: synthetic row count differs from real");
    if (hp.n_trees < 1) throw ConfigError("fit_forest: need at least one tree");
    if (hp.min_node_size < 1) throw ConfigError("fit_forest: min node size must be positive");
    for (const auto& col : real.schema()) {
        if (col.kind == ColumnKind::categorical && col.categories.size() > 64)
            throw SchemaError("fit_forest: more than 64 categories in column '" + col.name + "'");
    }

    const Dataset stacked = Dataset::stack(real, synth);
    const std::uint32_t n = static_cast<std::uint32_t>(real.n_rows());
    const std::uint32_t n_stacked = 2 * n;
    std::vector<std::uint8_t> labels(n_stacked, 0);
    for (std::uint32_t i = 0; i < n; ++i) labels[i] = 1;

    const std::uint32_t mtry = hp.resolved_mtry(real.n_cols());
    std::vector<Tree> trees(hp.n_trees);
    std::vector<std::vector<std::uint32_t>> bags(hp.n_trees);

    parallel_for(hp.n_trees, threads, [&](std::size_t t) {
        Rng tree_rng = rng.derive(t);
        auto& bag = bags[t];
        bag.resize(n_stacked);
        for (auto& r : bag) r = static_cast<std::uint32_t>(tree_rng.below(n_stacked));
        TreeBuilder builder(stacked, labels, hp, mtry, tree_rng.derive(0x6772));
        trees[t] = builder.build(bag);
    });

    return Forest(real.schema(), hp, n, std::move(trees), std::move(bags));
}

std::int32_t Forest::route_tree(std::size_t t, const Dataset& data, std::size_t row) const {
    const auto& nodes = trees_[t].nodes;
    std::int32_t idx = 0;
    while (!nodes[idx].is_leaf()) {
        const auto& rule = nodes[idx].rule;
        idx = goes_left(rule, get_cell(data, row, rule.feature)) ? nodes[idx].left
                                                                 : nodes[idx].right;
    }
    return idx;
}

std::int32_t Forest::route_tree(std::size_t t, const std::vector<Cell>& row) const {
    const auto& nodes = trees_[t].nodes;
    std::int32_t idx = 0;
    while (!nodes[idx].is_leaf()) {
        const auto& rule = nodes[idx].rule;
        const Cell& c = row[rule.feature];
        CellRef ref;
        if (!c.is_missing()) {
            ref.missing = false;
            if (c.is_number()) ref.num = c.number();
            else ref.cat = c.category();
        }
        idx = goes_left(rule, ref) ? nodes[idx].left : nodes[idx].right;
    }
    return idx;
}

double oob_accuracy(const Forest& forest, const Dataset& real, const Dataset& synth,
                    unsigned threads) {
    const std::uint32_t n = static_cast<std::uint32_t>(real.n_rows());
    const std::uint32_t n_stacked = 2 * n;
    const Dataset stacked = Dataset::stack(real, synth);

    std::vector<std::vector<std::uint8_t>> in_bag(forest.n_trees());
    for (std::size_t t = 0; t < forest.n_trees(); ++t) {
        in_bag[t].assign(n_stacked, 0);
        for (std::uint32_t r : forest.bag(t)) in_bag[t][r] = 1;
    }

    std::vector<std::int8_t> outcome(n_stacked, -1);  // -1 no votes, else correctness
    parallel_for(n_stacked, threads, [&](std::size_t i) {
        int votes_one = 0;
        int votes = 0;
        for (std::size_t t = 0; t < forest.n_trees(); ++t) {
            if (in_bag[t][i]) continue;
            const auto& node = forest.tree(t).nodes[forest.route_tree(t, stacked, i)];
            const bool predict_real = 2 * node.real_rows.size() > node.n_total;
            votes_one += predict_real ? 1 : 0;
            ++votes;
        }
        if (votes == 0) return;
        const int predicted = (2 * votes_one > votes) ? 1 : 0;
        const int truth = i < n ? 1 : 0;
        outcome[i] = (predicted == truth) ? 1 : 0;
    });

    std::size_t voted = 0, correct = 0;
    for (std::int8_t o : outcome) {
        if (o >= 0) {
            ++voted;
            correct += o;
        }
    }
    if (voted == 0) throw DataError("oob_accuracy: no OOB votes");
    return static_cast<double>(correct) / static_cast<double>(voted);
}

std::vector<std::int32_t> route(const Forest& forest, const std::vector<Cell>& row) {
    if (row.size() != forest.schema().size())
        throw SchemaError("route: row width does not match schema");
    std::vector<std::int32_t> leaves(forest.n_trees());
    for (std::size_t t = 0; t < forest.n_trees(); ++t)
        leaves[t] = forest.tree(t).nodes[forest.route_tree(t, row)].leaf_id;
    return leaves;
}

std::vector<std::int32_t> route(const Forest& forest, const Dataset& data, std::size_t row) {
    std::vector<std::int32_t> leaves(forest.n_trees());
    for (std::size_t t = 0; t < forest.n_trees(); ++t)
        leaves[t] = forest.tree(t).nodes[forest.route_tree(t, data, row)].leaf_id;
    return leaves;
}

}  // namespace missarf
