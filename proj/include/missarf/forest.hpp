#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "missarf/rng.hpp"
#include "missarf/tabular.hpp"

namespace missarf {

// Binary split with missingness incorporated in attributes: every rule
// records which child receives missing values. Numeric rules send x <= s
// left; categorical rules send labels in `left_labels` left. Labels unseen
// at the node during training follow the missing side when routing.
struct SplitRule {
    std::uint32_t feature = 0;
    bool is_numeric = true;
    double threshold = 0.0;          // numeric rules
    std::uint64_t left_labels = 0;   // categorical rules: bitmask over schema labels
    std::uint64_t seen_labels = 0;   // labels observed at the node
    bool missing_left = true;
};

struct TreeNode {
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    SplitRule rule;
    // Leaf payload.
    std::int32_t leaf_id = -1;            // global index across the forest
    std::uint32_t n_total = 0;            // bag rows in the leaf
    std::vector<std::uint32_t> real_rows; // real-data row ids, bag multiplicity kept

    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // root at index 0
};

struct ForestHyperparams {
    std::uint32_t n_trees = 100;
    std::uint32_t min_node_size = 10;
    std::uint32_t mtry = 0;  // 0 -> ceil(sqrt(p))

    std::uint32_t resolved_mtry(std::size_t p) const;
};

// Real-vs-synthetic random forest classifier. Bags are bootstrap samples of
// the 2n stacked rows (real first, labeled 1; synthetic second, labeled 0).
// Immutable once fitted; safe to share across threads.
class Forest {
  public:
    Forest() = default;
    Forest(std::vector<ColumnSchema> schema, ForestHyperparams hp, std::uint32_t n_real,
           std::vector<Tree> trees, std::vector<std::vector<std::uint32_t>> bags);

    const std::vector<ColumnSchema>& schema() const { return schema_; }
    const ForestHyperparams& hyperparams() const { return hp_; }
    std::size_t n_trees() const { return trees_.size(); }
    const Tree& tree(std::size_t t) const { return trees_[t]; }
    const std::vector<std::uint32_t>& bag(std::size_t t) const { return bags_[t]; }
    std::uint32_t n_real_in_bag(std::size_t t) const { return n_real_in_bag_[t]; }
    std::uint32_t n_real_rows() const { return n_real_; }
    std::size_t n_leaves() const { return n_leaves_; }

    // Terminal node index within tree t.
    std::int32_t route_tree(std::size_t t, const Dataset& data, std::size_t row) const;
    std::int32_t route_tree(std::size_t t, const std::vector<Cell>& row) const;

  private:
    std::vector<ColumnSchema> schema_;
    ForestHyperparams hp_;
    std::uint32_t n_real_ = 0;
    std::vector<Tree> trees_;
    std::vector<std::vector<std::uint32_t>> bags_;
    std::vector<std::uint32_t> n_real_in_bag_;
    std::size_t n_leaves_ = 0;
};

struct SplitCandidate {
    SplitRule rule;
    double score = 0.0;  // weighted Gini impurity of the two children
};

// Best MIA split of `rows` on `feature` under Gini impurity. Numeric
// features compare, for every midpoint threshold, the two child assignments
// of missing values; categorical features enumerate label subsets (all
// 2^(k-1)-1 partitions for k <= 10, otherwise prefix splits of labels
// ordered by class-1 proportion) crossed with the missing side. Returns
// nothing when the node is pure or no candidate satisfies `min_node_size`
// and strictly reduces impurity. Ties keep the first candidate in
// threshold-then-variant scan order.
std::optional<SplitCandidate> best_split_mia(const Dataset& data,
                                             const std::vector<std::uint32_t>& rows,
                                             std::uint32_t feature,
                                             const std::vector<std::uint8_t>& labels,
                                             std::uint32_t min_node_size);

// Grows hp.n_trees trees on bootstrap samples of the stacked (real, synth)
// rows. Trees are independent given per-tree derived rng streams, so the
// result is identical for any thread count.
Forest fit_forest(const Dataset& real, const Dataset& synth, const ForestHyperparams& hp,
                  const Rng& rng, unsigned threads = 1);

// Majority vote over trees whose bag excludes the row, scored against the
// real/synthetic labels. Rows with no voting tree are skipped; throws
// DataError if every row is skipped.
double oob_accuracy(const Forest& forest, const Dataset& real, const Dataset& synth,
                    unsigned threads = 1);

// Leaf id per tree for one row; total on schema-conforming rows, including
// rows with missing cells.
std::vector<std::int32_t> route(const Forest& forest, const std::vector<Cell>& row);
std::vector<std::int32_t> route(const Forest& forest, const Dataset& data, std::size_t row);

}  // namespace missarf
