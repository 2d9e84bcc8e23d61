#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "missarf/arf.hpp"
#include "oracles.hpp"

using namespace missarf;

namespace {

Dataset iid_uniform(Rng& rng, std::size_t n, std::size_t p) {
    std::vector<ColumnSchema> schema;
    for (std::size_t j = 0; j < p; ++j)
        schema.push_back({"x" + std::to_string(j), ColumnKind::numeric, {}});
    Dataset d(schema, n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) d.set_number(i, j, rng.uniform01());
    }
    return d;
}

double column_correlation(const Dataset& d, std::size_t a, std::size_t b) {
    const std::size_t n = d.n_rows();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += d.number(i, a);
        mb += d.number(i, b);
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = d.number(i, a) - ma;
        const double db = d.number(i, b) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("naive_synth keeps single-valued columns fixed") {
    std::vector<ColumnSchema> schema{{"x", ColumnKind::numeric, {}}};
    Dataset d(schema, 20);
    for (std::size_t i = 0; i < 20; ++i) d.set_number(i, 0, 7.5);
    const Dataset s = naive_synth(d, Rng(1));
    for (std::size_t i = 0; i < 20; ++i) CHECK(s.number(i, 0) == 7.5);
}

TEST_CASE("naive_synth destroys joint structure but keeps marginals") {
    Rng rng(5);
    std::vector<ColumnSchema> schema{{"a", ColumnKind::numeric, {}},
                                     {"b", ColumnKind::numeric, {}}};
    Dataset d(schema, 10000);
    for (std::size_t i = 0; i < 10000; ++i) {
        const double v = rng.normal();
        d.set_number(i, 0, v);
        d.set_number(i, 1, v);  // perfectly correlated
    }
    REQUIRE(column_correlation(d, 0, 1) == doctest::Approx(1.0));
    const Dataset s = naive_synth(d, Rng(17));
    CHECK(std::fabs(column_correlation(s, 0, 1)) < 0.1);
}

TEST_CASE("naive_synth draws missing cells at their marginal rate") {
    Rng rng(9);
    std::vector<ColumnSchema> schema{{"a", ColumnKind::numeric, {}}};
    const std::size_t n = 10000;
    Dataset d(schema, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!rng.bernoulli(0.4)) d.set_number(i, 0, rng.uniform01());
    }
    const double source_rate = double(d.missing_count()) / double(n);
    const Dataset s = naive_synth(d, Rng(23));
    const double rate = double(s.missing_count()) / double(n);
    // Binomial three-sigma band around the source rate.
    const double sd = std::sqrt(source_rate * (1 - source_rate) / double(n));
    CHECK(std::fabs(rate - source_rate) < 3 * sd + 1e-9);
}

TEST_CASE("leaf_resample of a single-leaf forest matches column supports and size") {
    Rng rng(31);
    const Dataset real = iid_uniform(rng, 50, 2);
    ForestHyperparams hp{3, 200, 0};  // min node size forces single leaves
    const Forest f = fit_forest(real, naive_synth(real, Rng(2)), hp, Rng(3));
    const Dataset s = leaf_resample(f, real, Rng(4));
    REQUIRE(s.n_rows() == real.n_rows());
    for (std::size_t j = 0; j < 2; ++j) {
        std::set<double> support;
        for (std::size_t i = 0; i < real.n_rows(); ++i) support.insert(real.number(i, j));
        for (std::size_t i = 0; i < s.n_rows(); ++i)
            CHECK(support.count(s.number(i, j)) == 1);
    }
}

TEST_CASE("leaf_resample keeps cluster structure once the forest separates it") {
    Rng rng(47);
    const Dataset real = oracle::two_cluster_data(rng, 300, 0.05);
    ForestHyperparams hp{20, 10, 0};
    const Forest f = fit_forest(real, naive_synth(real, Rng(11)), hp, Rng(12));
    const Dataset s = leaf_resample(f, real, Rng(13));
    CHECK(oracle::correct_quadrant_fraction(s) >= 0.95);
}

TEST_CASE("adversarial_fit converges fast on independent columns") {
    Rng data_rng(100);
    const Dataset real = iid_uniform(data_rng, 1000, 4);
    ForestHyperparams hp{30, 10, 0};
    const auto [forest, report] = adversarial_fit(real, hp, 0.0, 10, Rng(7), 2);
    CHECK(report.converged);
    CHECK(report.iterations <= 2);
    CHECK(report.oob_trace.size() == report.iterations);
    CHECK(report.oob_trace.back() < 0.5);
    CHECK(forest.n_trees() == 30);
}

TEST_CASE("adversarial_fit needs refinement on strongly dependent columns") {
    Rng data_rng(200);
    std::vector<ColumnSchema> schema{{"a", ColumnKind::numeric, {}},
                                     {"b", ColumnKind::numeric, {}}};
    Dataset real(schema, 800);
    for (std::size_t i = 0; i < 800; ++i) {
        const double v = data_rng.uniform01();
        real.set_number(i, 0, v);
        real.set_number(i, 1, v);
    }
    const auto [forest, report] = adversarial_fit(real, {25, 10, 0}, 0.0, 10, Rng(8), 2);
    CHECK(report.iterations >= 2);
    CHECK(report.oob_trace.front() > 0.5);  // naive synth is easily spotted
    CHECK(report.oob_trace.back() < report.oob_trace.front());
}

TEST_CASE("max_iters 0 returns the initial fit with an honest flag") {
    Rng data_rng(300);
    const Dataset real = iid_uniform(data_rng, 200, 2);
    const auto [forest, report] = adversarial_fit(real, {10, 5, 0}, 0.0, 0, Rng(9));
    CHECK(report.iterations == 1);
    CHECK(report.converged == (report.oob_trace[0] < 0.5));
}

TEST_CASE("adversarial_fit is deterministic under a fixed seed") {
    Rng data_rng(400);
    const Dataset real = iid_uniform(data_rng, 300, 3);
    const auto [fa, ra] = adversarial_fit(real, {8, 10, 0}, 0.0, 5, Rng(77), 1);
    const auto [fb, rb] = adversarial_fit(real, {8, 10, 0}, 0.0, 5, Rng(77), 2);
    CHECK(ra.oob_trace == rb.oob_trace);
    CHECK(ra.iterations == rb.iterations);
    REQUIRE(fa.n_leaves() == fb.n_leaves());
    const auto la = extract_leaves(fa, real);
    const auto lb = extract_leaves(fb, real);
    for (std::size_t l = 0; l < la.size(); ++l) {
        CHECK(la[l].weight == lb[l].weight);
        CHECK(la[l].row_ids == lb[l].row_ids);
    }
}

TEST_CASE("adversarial_fit rejects tiny inputs") {
    std::vector<ColumnSchema> schema{{"x", ColumnKind::numeric, {}}};
    Dataset one(schema, 1);
    one.set_number(0, 0, 1.0);
    CHECK_THROWS_AS(adversarial_fit(one, {5, 2, 0}, 0.0, 5, Rng(1)), DataError);
}

TEST_CASE("extract_leaves: single-leaf forest has open bounds and weight 1/T") {
    Rng rng(55);
    const Dataset real = iid_uniform(rng, 40, 2);
    ForestHyperparams hp{4, 200, 0};
    const Forest f = fit_forest(real, naive_synth(real, Rng(1)), hp, Rng(2));
    const auto leaves = extract_leaves(f, real);
    REQUIRE(leaves.size() == 4);
    for (const auto& leaf : leaves) {
        CHECK(leaf.weight == doctest::Approx(0.25).epsilon(1e-12));
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(std::isinf(leaf.num_bounds[j].lo));
            CHECK(std::isinf(leaf.num_bounds[j].hi));
        }
    }
}

TEST_CASE("extract_leaves: depth-1 split gives complementary half-lines") {
    std::vector<ColumnSchema> schema{{"x", ColumnKind::numeric, {}}};
    Dataset real(schema, 4);
    for (std::size_t i = 0; i < 4; ++i) real.set_number(i, 0, i < 2 ? -1.0 : 1.0);

    Tree tree;
    tree.nodes.resize(3);
    tree.nodes[0].left = 1;
    tree.nodes[0].right = 2;
    tree.nodes[0].rule = {0, true, 0.0, 0, 0, true};
    tree.nodes[1].n_total = 4;
    tree.nodes[1].real_rows = {0, 1};
    tree.nodes[2].n_total = 4;
    tree.nodes[2].real_rows = {2, 3};
    const Forest f(schema, ForestHyperparams{1, 1, 0}, 4, {tree},
                   {{0, 1, 2, 3, 4, 5, 6, 7}});

    const auto leaves = extract_leaves(f, real);
    REQUIRE(leaves.size() == 2);
    CHECK(std::isinf(leaves[0].num_bounds[0].lo));
    CHECK(leaves[0].num_bounds[0].hi == 0.0);
    CHECK(leaves[1].num_bounds[0].lo == 0.0);
    CHECK(std::isinf(leaves[1].num_bounds[0].hi));
    CHECK(leaves[0].weight == doctest::Approx(0.5));
    CHECK(leaves[1].weight == doctest::Approx(0.5));
}

TEST_CASE("leaf weights form a probability distribution and bounds hold rows") {
    Rng rng(66);
    Dataset real = iid_uniform(rng, 200, 3);
    // Punch in some missing cells so MIA routing is exercised.
    for (std::size_t i = 0; i < 200; ++i) {
        if (rng.bernoulli(0.2)) real.set_missing(i, rng.below(3));
    }
    const auto [forest, report] = adversarial_fit(real, {12, 8, 0}, 0.0, 4, Rng(3));
    const auto leaves = extract_leaves(forest, real);

    double total = 0.0;
    for (const auto& leaf : leaves) {
        CHECK(leaf.weight >= 0.0);
        total += leaf.weight;
    }
    CHECK(std::fabs(total - 1.0) <= 1e-12);

    // Every real bag row lies inside the bounds of the leaf it routes to
    // (missing cells exempt).
    for (std::size_t t = 0; t < forest.n_trees(); ++t) {
        for (std::uint32_t r : forest.bag(t)) {
            if (r >= real.n_rows()) continue;
            const auto node_idx = forest.route_tree(t, real, r);
            const auto& node = forest.tree(t).nodes[node_idx];
            const auto& leaf = leaves[static_cast<std::size_t>(node.leaf_id)];
            for (std::size_t j = 0; j < real.n_cols(); ++j) {
                if (real.is_missing(r, j)) continue;
                CHECK(leaf.num_bounds[j].contains(real.number(r, j)));
            }
        }
    }
}
