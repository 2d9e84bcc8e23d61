#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "missarf/forest.hpp"
#include "missarf/rng.hpp"
#include "missarf/tabular.hpp"

namespace missarf {

// Half-open numeric interval (lo, hi]; infinities mark unbounded sides.
struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double v) const { return v > lo && v <= hi; }
    bool operator==(const Interval&) const = default;
};

// One leaf's hyperrectangle, coverage weight and real-row membership. Bounds
// are the conjunction of the split conditions on the root-to-leaf path; the
// weight is n_tl / (T * n_t) over real rows in the tree's bag.
struct LeafGeometry {
    std::int32_t leaf_id = -1;
    std::uint32_t tree = 0;
    std::int32_t node = -1;                  // node index within the tree
    std::vector<Interval> num_bounds;        // per column; unused for categorical
    std::vector<std::uint64_t> allowed;      // per column label mask; unused for numeric
    double weight = 0.0;
    std::vector<std::uint32_t> row_ids;      // real training rows, bag multiplicity kept
};

struct ArfFitReport {
    std::size_t iterations = 0;
    std::vector<double> oob_trace;
    bool converged = false;
    double delta = 0.0;
};

// Column-wise bootstrap of the real data: marginals preserved in
// expectation (missing cells are drawable values), joint structure destroyed.
Dataset naive_synth(const Dataset& real, Rng rng);

// Column-wise bootstrap within each leaf: draw a leaf proportional to its
// weight, then draw every column independently from the leaf's real rows.
// Output has as many rows as the real data.
Dataset leaf_resample(const Forest& forest, const Dataset& real, Rng rng);

// Alternates synthetic-data generation and discriminator fitting until the
// out-of-bag accuracy drops below 0.5 + delta or `max_iters` refinement
// rounds have been spent (the initial fit is always performed). Returns the
// forest whose measured accuracy certified indistinguishability, or the last
// forest with converged=false.
std::pair<Forest, ArfFitReport> adversarial_fit(const Dataset& real, const ForestHyperparams& hp,
                                                double delta, std::size_t max_iters, const Rng& rng,
                                                unsigned threads = 1);

// One LeafGeometry per leaf per tree, ordered by global leaf id.
std::vector<LeafGeometry> extract_leaves(const Forest& forest, const Dataset& real);

}  // namespace missarf
