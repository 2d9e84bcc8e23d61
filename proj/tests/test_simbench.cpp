#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "missarf/simbench.hpp"
#include "missarf/stats_math.hpp"
#include "oracles.hpp"

using namespace missarf;

namespace {

double pearson(const Dataset& d, std::size_t a, std::size_t b) {
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

double column_mean(const Dataset& d, std::size_t j) {
    double s = 0;
    for (std::size_t i = 0; i < d.n_rows(); ++i) s += d.number(i, j);
    return s / double(d.n_rows());
}

}  // namespace

TEST_CASE("uniform marginal stays within its support") {
    const Dataset d = simulate_features({2000, 3, Marginal::uniform, EffectKind::linear, 0.5, 0},
                                        Rng(1));
    for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t i = 0; i < d.n_rows(); ++i) {
            CHECK(d.number(i, j) >= -1.0);
            CHECK(d.number(i, j) <= 1.0);
        }
    }
}

TEST_CASE("normal marginal preserves the Toeplitz correlation") {
    const Dataset d = simulate_features({100000, 4, Marginal::normal, EffectKind::linear, 0.5, 0},
                                        Rng(2));
    for (std::size_t a = 0; a < 4; ++a) {
        for (std::size_t b = 0; b < 4; ++b) {
            const double expect = std::pow(0.5, std::fabs(double(a) - double(b)));
            CHECK(pearson(d, a, b) == doctest::Approx(expect).epsilon(0.0).scale(1).epsilon(0.02));
        }
    }
}

TEST_CASE("binary marginal has mean one half") {
    const std::size_t n = 20000;
    const Dataset d =
        simulate_features({n, 2, Marginal::binom, EffectKind::linear, 0.5, 0}, Rng(3));
    const double band = 3.0 * std::sqrt(0.25 / double(n));
    CHECK(std::fabs(column_mean(d, 0) - 0.5) < band);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = d.number(i, 0);
        CHECK((v == 0.0 || v == 1.0));
    }
}

TEST_CASE("poisson and gamma marginals match their means") {
    const std::size_t n = 40000;
    const Dataset dp =
        simulate_features({n, 2, Marginal::pois, EffectKind::linear, 0.5, 0}, Rng(4));
    CHECK(column_mean(dp, 0) == doctest::Approx(2.0).epsilon(0.03));
    const Dataset dg =
        simulate_features({n, 2, Marginal::gamma, EffectKind::linear, 0.5, 0}, Rng(5));
    CHECK(column_mean(dg, 0) == doctest::Approx(4.0).epsilon(0.03));  // shape 2 / rate 0.5
}

TEST_CASE("effect coefficients are equidistant from -0.5 to 0.5") {
    const auto beta = effect_coefficients(4);
    CHECK(beta[0] == doctest::Approx(-0.5));
    CHECK(beta[1] == doctest::Approx(-1.0 / 6.0));
    CHECK(beta[2] == doctest::Approx(1.0 / 6.0));
    CHECK(beta[3] == doctest::Approx(0.5));
    CHECK_THROWS_AS(effect_coefficients(1), ConfigError);
}

TEST_CASE("zero covariates hit probability one half") {
    std::vector<ColumnSchema> schema{{"x1", ColumnKind::numeric, {}},
                                     {"x2", ColumnKind::numeric, {}}};
    Dataset zeros(schema, 20000);
    for (std::size_t i = 0; i < zeros.n_rows(); ++i) {
        zeros.set_number(i, 0, 0.0);
        zeros.set_number(i, 1, 0.0);
    }
    const auto y = simulate_outcome(zeros, EffectKind::linear, Rng(6));
    double mean = 0;
    for (int v : y) mean += v;
    mean /= double(y.size());
    CHECK(std::fabs(mean - 0.5) < 3.0 * std::sqrt(0.25 / double(y.size())));
}

TEST_CASE("squared effects are sign-symmetric") {
    std::vector<ColumnSchema> schema{{"x1", ColumnKind::numeric, {}},
                                     {"x2", ColumnKind::numeric, {}}};
    const std::size_t n = 30000;
    Dataset pos(schema, n), neg(schema, n);
    Rng rng(7);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = rng.normal(), b = rng.normal();
        pos.set_number(i, 0, a);
        pos.set_number(i, 1, b);
        neg.set_number(i, 0, -a);
        neg.set_number(i, 1, -b);
    }
    const auto y1 = simulate_outcome(pos, EffectKind::squared, Rng(8));
    const auto y2 = simulate_outcome(neg, EffectKind::squared, Rng(8));
    CHECK(y1 == y2);  // same probabilities and same rng stream
}

TEST_CASE("MCAR amputes at the requested rate in target columns only") {
    const std::size_t n = 2000;
    const Dataset d =
        simulate_features({n, 4, Marginal::normal, EffectKind::linear, 0.5, 0}, Rng(9));
    const Dataset amp = ampute(d, {Mechanism::MCAR, 0.2, {}, 0}, Rng(10));
    for (std::size_t j = 0; j < 2; ++j) {  // targets: first ceil(4/2) = 2 columns
        std::size_t missing = 0;
        for (std::size_t i = 0; i < n; ++i) missing += amp.is_missing(i, j);
        const double rate = double(missing) / double(n);
        CHECK(std::fabs(rate - 0.2) < 3.0 * std::sqrt(0.2 * 0.8 / double(n)));
    }
    for (std::size_t j = 2; j < 4; ++j) {
        for (std::size_t i = 0; i < n; ++i) CHECK_FALSE(amp.is_missing(i, j));
    }
}

TEST_CASE("MNAR removals sit on one side of the column median") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 200;
        const Dataset d = simulate_features(
            {n, 2, Marginal::normal, EffectKind::linear, 0.5, 0}, rng.derive(rep));
        const Dataset amp =
            ampute(d, {Mechanism::MNAR, 0.3, {0}, 0}, rng.derive(1000 + rep));
        std::vector<double> values;
        for (std::size_t i = 0; i < n; ++i) values.push_back(d.number(i, 0));
        std::sort(values.begin(), values.end());
        const double median = 0.5 * (values[n / 2 - 1] + values[n / 2]);
        bool any_below = false, any_above = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (amp.is_missing(i, 0)) {
                (d.number(i, 0) <= median ? any_below : any_above) = true;
            }
        }
        const bool both_sides = any_below && any_above;
        CHECK_FALSE(both_sides);
    }
}

TEST_CASE("MAR confines removals to the driver-side group at the adjusted rate") {
    const std::size_t n = 4000;
    const Dataset d =
        simulate_features({n, 2, Marginal::normal, EffectKind::linear, 0.5, 0}, Rng(12));
    const double q = 0.3;
    const Dataset amp = ampute(d, {Mechanism::MAR, q, {0}, 0}, Rng(13));

    // Reconstruct the driver median cut; column 1 is the nearest never-
    // amputed column.
    CHECK(mar_driver_column(0, 2, {0}) == 1);
    std::vector<double> driver;
    for (std::size_t i = 0; i < n; ++i) driver.push_back(d.number(i, 1));
    std::sort(driver.begin(), driver.end());
    const double median = 0.5 * (driver[n / 2 - 1] + driver[n / 2]);

    std::size_t miss_below = 0, miss_above = 0, below = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool side_below = d.number(i, 1) <= median;
        below += side_below;
        if (amp.is_missing(i, 0)) (side_below ? miss_below : miss_above) += 1;
    }
    CHECK((miss_below == 0 || miss_above == 0));
    const std::size_t group = miss_below > 0 ? below : n - below;
    const double in_group_rate = double(miss_below + miss_above) / double(group);
    const double expected = std::min(1.0, q * double(n) / double(group));
    CHECK(std::fabs(in_group_rate - expected) <
          3.0 * std::sqrt(expected * (1 - expected) / double(group)) + 1e-12);
}

TEST_CASE("rates exceeding the group size adjust downward") {
    const std::size_t n = 1000;
    const Dataset d =
        simulate_features({n, 2, Marginal::normal, EffectKind::linear, 0.5, 0}, Rng(14));
    const Dataset amp = ampute(d, {Mechanism::MNAR, 0.8, {0}, 0}, Rng(15));
    std::size_t missing = 0;
    for (std::size_t i = 0; i < n; ++i) missing += amp.is_missing(i, 0);
    // Group is about half the rows; the within-group rate saturates at 1.
    CHECK(double(missing) / double(n) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("ampute validates its configuration") {
    const Dataset d =
        simulate_features({100, 2, Marginal::normal, EffectKind::linear, 0.5, 0}, Rng(16));
    CHECK_THROWS_AS(ampute(d, {Mechanism::MCAR, 0.0, {}, 0}, Rng(1)), ConfigError);
    CHECK_THROWS_AS(ampute(d, {Mechanism::MCAR, 1.0, {}, 0}, Rng(1)), ConfigError);
    CHECK_THROWS_AS(ampute(d, {Mechanism::MCAR, 0.2, {5}, 0}, Rng(1)), ConfigError);
}

TEST_CASE("nrmse satisfies its closed forms and matches the oracle") {
    const Dataset d =
        simulate_features({50, 4, Marginal::normal, EffectKind::linear, 0.5, 0}, Rng(17));
    const auto params = compute_standardization(d);
    CHECK(nrmse(d, d, params) == 0.0);

    Dataset bumped = d;
    bumped.set_number(7, 2, d.number(7, 2) + params.columns[2].sd);
    CHECK(nrmse(bumped, d, params) ==
          doctest::Approx(1.0 / std::sqrt(50.0 * 4.0)).epsilon(1e-12));

    Rng rng(18);
    for (int rep = 0; rep < 20; ++rep) {
        Dataset noisy = d;
        for (std::size_t i = 0; i < d.n_rows(); ++i) {
            for (std::size_t j = 0; j < d.n_cols(); ++j) {
                if (rng.bernoulli(0.3)) noisy.set_number(i, j, d.number(i, j) + rng.normal());
            }
        }
        CHECK(nrmse(noisy, d, params) ==
              doctest::Approx(oracle::nrmse(noisy, d, params)).epsilon(1e-12));
    }
}

TEST_CASE("logistic regression recovers the null and the grouped closed form") {
    // Null model: y independent of X.
    Rng rng(19);
    const Dataset x =
        simulate_features({5000, 3, Marginal::normal, EffectKind::linear, 0.5, 0}, Rng(20));
    std::vector<int> y(x.n_rows());
    for (auto& v : y) v = rng.bernoulli(0.5);
    const LogisticFit null_fit = fit_logistic(x, y);
    CHECK(null_fit.converged);
    for (std::size_t j = 0; j < null_fit.beta.size(); ++j) {
        CHECK(std::fabs(null_fit.beta[j]) < 3.0 * std::sqrt(null_fit.variance[j]));
    }

    // Grouped data with a binary covariate has a closed-form MLE.
    std::vector<ColumnSchema> schema{{"x", ColumnKind::numeric, {}}};
    const std::size_t n0 = 70, k0 = 21, n1 = 50, k1 = 40;
    Dataset g(schema, n0 + n1);
    std::vector<int> gy(n0 + n1);
    for (std::size_t i = 0; i < n0 + n1; ++i) {
        const bool level1 = i >= n0;
        g.set_number(i, 0, level1 ? 1.0 : 0.0);
        gy[i] = level1 ? (i - n0 < k1) : (i < k0);
    }
    const LogisticFit fit = fit_logistic(g, gy);
    REQUIRE(fit.converged);
    const double p0 = double(k0) / n0, p1 = double(k1) / n1;
    CHECK(fit.beta[0] == doctest::Approx(std::log(p0 / (1 - p0))).epsilon(1e-8));
    CHECK(fit.beta[1] ==
          doctest::Approx(std::log(p1 / (1 - p1)) - std::log(p0 / (1 - p0))).epsilon(1e-8));

    // Score equations hold at the optimum.
    const auto probs = predict_probabilities(fit, g);
    double g0 = 0, g1 = 0;
    for (std::size_t i = 0; i < gy.size(); ++i) {
        g0 += gy[i] - probs[i];
        g1 += g.number(i, 0) * (gy[i] - probs[i]);
    }
    CHECK(std::fabs(g0) < 1e-6);
    CHECK(std::fabs(g1) < 1e-6);
}

TEST_CASE("perfect separation raises the non-convergence flag") {
    std::vector<ColumnSchema> schema{{"x", ColumnKind::numeric, {}}};
    Dataset d(schema, 40);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        d.set_number(i, 0, i < 20 ? -1.0 - 0.01 * i : 1.0 + 0.01 * i);
        y[i] = i < 20 ? 0 : 1;
    }
    const LogisticFit fit = fit_logistic(d, y);
    CHECK_FALSE(fit.converged);
}

TEST_CASE("brier score closed forms and oracle") {
    std::vector<ColumnSchema> schema{{"x", ColumnKind::numeric, {}}};
    Dataset d(schema, 100);
    std::vector<int> y(100);
    Rng rng(21);
    for (std::size_t i = 0; i < 100; ++i) {
        y[i] = rng.bernoulli(0.4);
        d.set_number(i, 0, double(y[i]));
    }
    LogisticFit fifty;
    fifty.beta = {0.0, 0.0};
    CHECK(brier(fifty, d, y) == doctest::Approx(0.25).epsilon(1e-15));

    LogisticFit sharp;
    sharp.beta = {-1000.0, 2000.0};
    CHECK(brier(sharp, d, y) == doctest::Approx(0.0));

    LogisticFit other;
    other.beta = {0.3, -0.7};
    CHECK(brier(other, d, y) ==
          doctest::Approx(oracle::brier(predict_probabilities(other, d), y)).epsilon(1e-15));
}

TEST_CASE("rubin pooling closed forms") {
    // All estimates identical: no between-variance, Wald-style interval.
    std::vector<std::vector<double>> est(5, {1.5}), var(5, {0.04});
    const auto pooled = pool_rubin(est, var, 997.0);
    REQUIRE(pooled.size() == 1);
    CHECK(pooled[0].estimate == doctest::Approx(1.5));
    CHECK(pooled[0].between == doctest::Approx(0.0));
    CHECK(pooled[0].total_variance == doctest::Approx(0.04));
    const double half = pooled[0].ci_hi - pooled[0].estimate;
    CHECK(half == doctest::Approx(1.96 * 0.2).epsilon(0.01));

    // Hand-computed m = 2 case.
    const auto p2 = pool_rubin({{0.0}, {2.0}}, {{0.0}, {0.0}}, 100.0);
    CHECK(p2[0].estimate == doctest::Approx(1.0));
    CHECK(p2[0].between == doctest::Approx(2.0));
    CHECK(p2[0].total_variance == doctest::Approx(3.0));

    CHECK_THROWS_AS(pool_rubin({{1.0}}, {{1.0}}, 10.0), ConfigError);
}

TEST_CASE("rubin pooling matches the direct-formula oracle") {
    Rng rng(22);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t m = 2 + rng.below(8);
        std::vector<std::vector<double>> est(m, std::vector<double>(1));
        std::vector<std::vector<double>> var(m, std::vector<double>(1));
        std::vector<double> e(m), v(m);
        for (std::size_t i = 0; i < m; ++i) {
            e[i] = rng.uniform(-3, 3);
            v[i] = rng.uniform(0.01, 2.0);
            est[i][0] = e[i];
            var[i][0] = v[i];
        }
        const auto pooled = pool_rubin(est, var, 500.0);
        const auto reference = oracle::rubin(e, v);
        CHECK(pooled[0].estimate == doctest::Approx(reference.estimate).epsilon(1e-12));
        CHECK(pooled[0].within == doctest::Approx(reference.within).epsilon(1e-12));
        CHECK(pooled[0].between == doctest::Approx(reference.between).epsilon(1e-12));
        CHECK(pooled[0].total_variance == doctest::Approx(reference.total).epsilon(1e-12));
        // Rubin identity holds exactly.
        CHECK(pooled[0].total_variance ==
              doctest::Approx(pooled[0].within +
                              (1.0 + 1.0 / double(m)) * pooled[0].between));
    }
}

TEST_CASE("coverage statistics over replicates") {
    std::vector<std::vector<PooledEstimate>> reps;
    for (int k = 0; k < 4; ++k) {
        PooledEstimate po;
        po.estimate = 0.5;
        po.ci_lo = k == 0 ? 0.6 : 0.0;  // first replicate misses the truth
        po.ci_hi = k == 0 ? 0.8 : 1.0;
        reps.push_back({po});
    }
    const auto stats = coverage_stats(reps, {0.5});
    CHECK(stats[0].coverage == doctest::Approx(0.75));
    CHECK(stats[0].avg_width == doctest::Approx((0.2 + 3.0) / 4.0));
    CHECK(stats[0].rmse == doctest::Approx(0.0));
}

TEST_CASE("random baseline draws from the observed support") {
    std::vector<ColumnSchema> schema{{"x", ColumnKind::numeric, {}},
                                     {"c", ColumnKind::categorical, {"a", "b"}}};
    Dataset d(schema, 100);
    Rng rng(23);
    for (std::size_t i = 0; i < 100; ++i) {
        if (i % 4 != 0) d.set_number(i, 0, i % 3 == 0 ? 5.0 : 7.0);
        if (i % 5 != 0) d.set_category(i, 1, i % 2 ? 1 : 0);
    }
    const auto result = baseline_random(d, 3, Rng(24));
    REQUIRE(result.datasets.size() == 3);
    for (const auto& imp : result.datasets) {
        CHECK(imp.missing_count() == 0);
        for (std::size_t i = 0; i < 100; ++i) {
            const double v = imp.number(i, 0);
            CHECK((v == 5.0 || v == 7.0));
        }
    }

    Dataset all_equal(schema, 10);
    for (std::size_t i = 0; i < 10; ++i) {
        if (i > 4) all_equal.set_number(i, 0, 9.0);
        all_equal.set_category(i, 1, 0);
    }
    const auto filled = baseline_random(all_equal, 1, Rng(25));
    for (std::size_t i = 0; i < 10; ++i) CHECK(filled.datasets[0].number(i, 0) == 9.0);

    Dataset empty_col(schema, 5);
    for (std::size_t i = 0; i < 5; ++i) empty_col.set_category(i, 1, 0);
    CHECK_THROWS_AS(baseline_random(empty_col, 1, Rng(26)), DataError);
}

TEST_CASE("random baseline reproduces the observed distribution") {
    std::vector<ColumnSchema> schema{{"c", ColumnKind::categorical, {"a", "b", "z"}}};
    Dataset d(schema, 3000);
    Rng rng(27);
    std::vector<double> target{0.5, 0.3, 0.2};
    std::vector<std::size_t> observed_counts(3, 0);
    for (std::size_t i = 0; i < 3000; ++i) {
        if (i % 10 == 0) continue;  // missing
        const double u = rng.uniform01();
        const int c = u < 0.5 ? 0 : (u < 0.8 ? 1 : 2);
        d.set_category(i, 0, c);
        ++observed_counts[c];
    }
    const auto result = baseline_random(d, 1, Rng(28));
    std::vector<double> imputed_counts(3, 0);
    std::size_t n_imputed = 0;
    for (std::size_t i = 0; i < 3000; ++i) {
        if (d.is_missing(i, 0)) {
            ++imputed_counts[result.datasets[0].category(i, 0)];
            ++n_imputed;
        }
    }
    const double total_obs =
        double(observed_counts[0] + observed_counts[1] + observed_counts[2]);
    double chi2 = 0;
    for (int c = 0; c < 3; ++c) {
        const double expect = double(n_imputed) * observed_counts[c] / total_obs;
        chi2 += (imputed_counts[c] - expect) * (imputed_counts[c] - expect) / expect;
    }
    CHECK(stats::chi_square_cdf(chi2, 2) < 0.99);
}

TEST_CASE("median baseline fills medians and schema-order modes") {
    std::vector<ColumnSchema> schema{{"a", ColumnKind::numeric, {}},
                                     {"b", ColumnKind::numeric, {}},
                                     {"c", ColumnKind::categorical, {"x", "y"}}};
    Dataset d(schema, 5);
    // Column a: observed {1,2,3}, hole at row 3 -> median 2.
    d.set_number(0, 0, 1);
    d.set_number(1, 0, 2);
    d.set_number(2, 0, 3);
    // Column b: observed {1,2,3,4}, hole at row 4 -> midpoint 2.5.
    d.set_number(0, 1, 1);
    d.set_number(1, 1, 2);
    d.set_number(2, 1, 3);
    d.set_number(3, 1, 4);
    // Column c: observed {x,x,y,y}, hole at row 4 -> tie broken to x.
    d.set_category(0, 2, 0);
    d.set_category(1, 2, 0);
    d.set_category(2, 2, 1);
    d.set_category(3, 2, 1);
    const Dataset filled = baseline_median(d);
    CHECK(filled.number(3, 0) == 2.0);
    CHECK(filled.number(4, 0) == 2.0);
    CHECK(filled.number(4, 1) == 2.5);
    CHECK(filled.category(4, 2) == 0);
}

TEST_CASE("benchmark config parsing and validation") {
    const std::string path = "/tmp/missarf_bench_cfg.ini";
    {
        std::ofstream out(path);
        out << "# smoke grid\n"
            << "setting = single\n"
            << "n = 60\n"
            << "p = 2, 4\n"
            << "marginal = normal, uniform\n"
            << "effect = linear\n"
            << "mechanism = MCAR\n"
            << "proportion = 0.2\n"
            << "methods = median, random\n"
            << "replicates = 2\n"
            << "trees = 5\n"
            << "seed = 9\n";
    }
    const auto cfg = parse_benchmark_config(path);
    CHECK(cfg.setting == BenchSetting::single);
    CHECK(cfg.p_values == std::vector<std::size_t>{2, 4});
    CHECK(cfg.marginals.size() == 2);
    CHECK(cfg.replicates == 2);
    CHECK(cfg.trees == 5);

    {
        std::ofstream out(path);
        out << "setting = single\nbogus_key = 1\n";
    }
    CHECK_THROWS_WITH_AS(parse_benchmark_config(path), doctest::Contains(":2:"), ConfigError);

    {
        std::ofstream out(path);
        out << "setting = multiple\nmethods = median\n";
    }
    CHECK_THROWS_AS(parse_benchmark_config(path), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("benchmark runner emits deterministic, schedule-independent rows") {
    BenchmarkConfig cfg;
    cfg.setting = BenchSetting::single;
    cfg.n_values = {60};
    cfg.p_values = {2};
    cfg.marginals = {Marginal::normal};
    cfg.effects = {EffectKind::linear};
    cfg.mechanisms = {Mechanism::MCAR, Mechanism::MNAR};
    cfg.proportions = {0.2};
    cfg.methods = {BenchMethod::median, BenchMethod::random};
    cfg.replicates = 3;
    cfg.trees = 5;
    cfg.min_node_size = 5;
    cfg.seed = 31;

    const auto rows1 = run_benchmark(cfg, 1);
    const auto rows2 = run_benchmark(cfg, 2);
    REQUIRE(rows1.size() == rows2.size());
    // 2 cells x 3 replicates x 2 methods x 2 metrics
    CHECK(rows1.size() == 24);
    for (std::size_t i = 0; i < rows1.size(); ++i) {
        CHECK(rows1[i].metric == rows2[i].metric);
        CHECK(rows1[i].value == rows2[i].value);
        CHECK(rows1[i].replicate == rows2[i].replicate);
        CHECK(rows1[i].status == "ok");
    }

    const std::string out_path = "/tmp/missarf_results_test.csv";
    write_results_csv(rows1, out_path);
    std::ifstream in(out_path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "n,p,marginal,effect,mechanism,proportion,method,m,replicate,metric,feature,"
          "value,status,wall_ms");
    std::remove(out_path.c_str());
}

TEST_CASE("multiple-imputation benchmark produces per-feature inference rows") {
    BenchmarkConfig cfg;
    cfg.setting = BenchSetting::multiple;
    cfg.n_values = {80};
    cfg.p_values = {2};
    cfg.marginals = {Marginal::normal};
    cfg.effects = {EffectKind::linear};
    cfg.mechanisms = {Mechanism::MCAR};
    cfg.proportions = {0.2};
    cfg.methods = {BenchMethod::random};
    cfg.replicates = 2;
    cfg.m = 3;
    cfg.seed = 32;

    const auto rows = run_benchmark(cfg, 2);
    // 1 cell x 2 replicates x 1 method x (p+1 = 3 features) x 3 metrics
    CHECK(rows.size() == 18);
    std::size_t covered_rows = 0;
    for (const auto& r : rows) {
        CHECK(r.feature >= 0);
        CHECK(r.feature <= 2);
        if (r.metric == "covered") {
            ++covered_rows;
            CHECK((r.value == 0.0 || r.value == 1.0));
        }
    }
    CHECK(covered_rows == 6);
}
