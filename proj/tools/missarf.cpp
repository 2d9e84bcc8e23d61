// missarf: adversarial-random-forest density estimation and missing-value
// imputation, with the simulation benchmark used to evaluate it.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "missarf/impute.hpp"
#include "missarf/model_io.hpp"
#include "missarf/parallel.hpp"
#include "missarf/simbench.hpp"
#include "missarf/tabular.hpp"

namespace {

using namespace missarf;

constexpr const char* kVersion = "0.1.0";

struct GlobalOptions {
    unsigned threads = default_threads();
    bool print_config = false;
};

std::vector<ColumnSchema> parse_categorical_flag(const std::string& names) {
    std::vector<ColumnSchema> hints;
    std::stringstream ss(names);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (!name.empty()) hints.push_back({name, ColumnKind::categorical, {}});
    }
    return hints;
}

void print_kv(std::ostream& out, const std::string& key, const std::string& value) {
    out << key << "=" << value << "\n";
}

struct ImputeArgs {
    std::string input;
    std::string out_prefix;
    std::string categorical;
    bool single = false;
    bool expectation = false;
    std::size_t m = 20;
    bool m_given = false;
    ImputationConfig cfg;
    std::string mean_kind = "truncated_mean";
};

void echo_impute_config(std::ostream& out, const ImputeArgs& args, unsigned threads) {
    print_kv(out, "input", args.input);
    print_kv(out, "out", args.out_prefix);
    const char* mode = args.cfg.mode == ImputeMode::single_expectation ? "expectation"
                       : args.cfg.mode == ImputeMode::single_sample    ? "single"
                                                                       : "multiple";
    print_kv(out, "mode", mode);
    print_kv(out, "m", std::to_string(args.cfg.n_outputs()));
    print_kv(out, "trees", std::to_string(args.cfg.trees));
    print_kv(out, "min_node_size", std::to_string(args.cfg.min_node_size));
    print_kv(out, "mtry", std::to_string(args.cfg.mtry));
    print_kv(out, "delta", format_double(args.cfg.delta));
    print_kv(out, "max_iters", std::to_string(args.cfg.max_iters));
    print_kv(out, "seed", std::to_string(args.cfg.seed));
    print_kv(out, "mean_kind", args.mean_kind);
    print_kv(out, "alpha", format_double(args.cfg.alpha));
    print_kv(out, "threads", std::to_string(threads));
}

int run_impute(const ImputeArgs& args_in, const GlobalOptions& global) {
    ImputeArgs args = args_in;
    const int mode_flags = int(args.single) + int(args.expectation) + int(args.m_given);
    if (mode_flags > 1)
        throw ConfigError("choose exactly one of --single, --expectation, --m");
    if (args.single) {
        args.cfg.mode = ImputeMode::single_sample;
    } else if (args.m_given) {
        if (args.m < 1) throw ConfigError("--m must be at least 1");
        args.cfg.mode = ImputeMode::multiple;
        args.cfg.m = args.m;
    } else {
        args.cfg.mode = ImputeMode::single_expectation;
    }
    if (args.mean_kind == "truncated_mean") {
        args.cfg.mean_kind = NumericMean::truncated_mean;
    } else if (args.mean_kind == "raw_leaf_mean") {
        args.cfg.mean_kind = NumericMean::raw_leaf_mean;
    } else {
        throw ConfigError("--mean-kind must be truncated_mean or raw_leaf_mean");
    }
    if (global.print_config) echo_impute_config(std::cerr, args, global.threads);

    const Dataset data = read_csv(args.input, parse_categorical_flag(args.categorical));
    const ImputedSet result =
        impute_dataset(data, args.cfg, Rng(args.cfg.seed), global.threads);
    for (const auto& warning : result.warnings) std::cerr << "warning: " << warning << "\n";

    for (std::size_t i = 0; i < result.datasets.size(); ++i) {
        write_csv(result.datasets[i], args.out_prefix + "_" + std::to_string(i + 1) + ".csv");
    }
    std::ofstream sidecar(args.out_prefix + "_provenance.txt");
    if (!sidecar) throw DataError("cannot write provenance sidecar");
    echo_impute_config(sidecar, args, global.threads);
    print_kv(sidecar, "model_fingerprint", result.model_fingerprint);
    print_kv(sidecar, "model_format_version", std::to_string(kModelFormatVersion));
    print_kv(sidecar, "arf_iterations", std::to_string(result.fit_report.iterations));
    print_kv(sidecar, "arf_converged", result.fit_report.converged ? "true" : "false");
    return 0;
}

struct SimulateArgs {
    std::size_t n = 1000;
    std::size_t p = 4;
    std::string marginal = "normal";
    std::string effect = "linear";
    std::uint64_t seed = 42;
    std::string out;
};

int run_simulate(const SimulateArgs& args, const GlobalOptions& global) {
    SimSpec spec;
    spec.n = args.n;
    spec.p = args.p;
    spec.marginal = marginal_from_string(args.marginal);
    spec.effect = effect_from_string(args.effect);
    spec.seed = args.seed;
    if (global.print_config) {
        print_kv(std::cerr, "n", std::to_string(spec.n));
        print_kv(std::cerr, "p", std::to_string(spec.p));
        print_kv(std::cerr, "marginal", to_string(spec.marginal));
        print_kv(std::cerr, "effect", to_string(spec.effect));
        print_kv(std::cerr, "seed", std::to_string(spec.seed));
    }
    const Rng rng(spec.seed);
    const Dataset features = simulate_features(spec, rng.derive(1));
    const auto outcome = simulate_outcome(features, spec.effect, rng.derive(2));

    auto schema = features.schema();
    schema.push_back({"y", ColumnKind::numeric, {}});
    Dataset with_y(schema, features.n_rows());
    for (std::size_t j = 0; j < features.n_cols(); ++j) {
        for (std::size_t i = 0; i < features.n_rows(); ++i)
            with_y.set_number(i, j, features.number(i, j));
    }
    for (std::size_t i = 0; i < features.n_rows(); ++i)
        with_y.set_number(i, features.n_cols(), outcome[i]);
    write_csv(with_y, args.out);
    return 0;
}

struct AmputeArgs {
    std::string input;
    std::string out;
    std::string mechanism = "MCAR";
    double proportion = 0.2;
    std::string targets;
    std::uint64_t seed = 42;
};

int run_ampute(const AmputeArgs& args) {
    const Dataset data = read_csv(args.input);
    AmputeSpec spec;
    spec.mechanism = mechanism_from_string(args.mechanism);
    spec.proportion = args.proportion;
    spec.seed = args.seed;
    if (!args.targets.empty()) {
        std::stringstream ss(args.targets);
        std::string name;
        while (std::getline(ss, name, ',')) {
            bool found = false;
            for (std::size_t j = 0; j < data.n_cols(); ++j) {
                if (data.column_schema(j).name == name) {
                    spec.targets.push_back(j);
                    found = true;
                    break;
                }
            }
            if (!found) throw ConfigError("unknown target column '" + name + "'");
        }
    }
    write_csv(ampute(data, spec, Rng(spec.seed)), args.out);
    return 0;
}

struct FitArgs {
    std::string input;
    std::string model_path;
    std::string categorical;
    std::uint32_t trees = 100;
    std::uint32_t min_node_size = 10;
    std::uint32_t mtry = 0;
    double delta = 0.0;
    std::size_t max_iters = 10;
    double alpha = 0.0;
    std::uint64_t seed = 42;
};

int run_fit(const FitArgs& args, const GlobalOptions& global) {
    const Dataset data = read_csv(args.input, parse_categorical_flag(args.categorical));
    ForestHyperparams hp{args.trees, args.min_node_size, args.mtry};
    ArfModel model;
    auto [forest, report] = adversarial_fit(data, hp, args.delta, args.max_iters,
                                            Rng(args.seed).derive(0x464954), global.threads);
    model.forest = std::move(forest);
    model.report = std::move(report);
    model.density = fit_leaf_densities(model.forest, extract_leaves(model.forest, data), data,
                                       DensityFitParams{args.alpha});
    save_model(model, args.model_path);
    std::cerr << "fitted " << model.density.n_leaves() << " leaves in "
              << model.report.iterations << " iteration(s); oob trace:";
    for (double acc : model.report.oob_trace) std::cerr << " " << format_double(acc);
    std::cerr << (model.report.converged ? " (converged)" : " (not converged)") << "\n";
    return 0;
}

struct LogprobArgs {
    std::string model_path;
    std::string input;
};

int run_logprob(const LogprobArgs& args) {
    const ArfModel model = load_model(args.model_path);
    const Dataset data = read_csv(args.input, model.density.schema());
    if (data.schema() != model.density.schema())
        throw SchemaError("input columns do not match the model schema");
    if (data.has_missing())
        throw DataError("logprob requires fully observed rows");
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        std::printf("%.16e\n", log_density(model.density, data, i));
    }
    return 0;
}

struct BenchmarkArgs {
    std::string config;
    std::string out;
};

int run_benchmark_cmd(const BenchmarkArgs& args, const GlobalOptions& global) {
    const BenchmarkConfig cfg = parse_benchmark_config(args.config);
    const auto rows = run_benchmark(cfg, global.threads,
                                    [](const std::string& line) { std::cerr << line << "\n"; });
    write_results_csv(rows, args.out);
    std::size_t ok = 0;
    for (const auto& row : rows) ok += row.metric != "error";
    if (ok == 0) throw DataError("benchmark produced no successful replicates");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarial random forest density estimation and imputation"};
    app.set_version_flag("--version", std::string("missarf ") + kVersion + " (model format " +
                                          std::to_string(kModelFormatVersion) + ")");
    GlobalOptions global;
    app.add_option("--threads", global.threads,
                   "Worker threads (1 forces fully sequential execution)")
        ->capture_default_str();
    app.add_flag("--print-config", global.print_config,
                 "Print the resolved configuration to stderr");
    app.require_subcommand(1);

    ImputeArgs impute_args;
    auto* impute_cmd = app.add_subcommand("impute", "Impute missing values with MissARF");
    impute_cmd->add_option("--input", impute_args.input, "Input CSV")->required();
    impute_cmd->add_option("--out", impute_args.out_prefix, "Output file prefix")->required();
    impute_cmd->add_option("--categorical", impute_args.categorical,
                           "Comma-separated categorical column names");
    impute_cmd->add_flag("--single", impute_args.single,
                         "Single imputation by one conditional draw");
    impute_cmd->add_flag("--expectation", impute_args.expectation,
                         "Single imputation by conditional expectation (default)");
    impute_cmd->add_option("--m", impute_args.m, "Multiple imputation with m datasets")
        ->capture_default_str();
    impute_cmd->add_option("--trees", impute_args.cfg.trees, "Number of trees")
        ->capture_default_str();
    impute_cmd
        ->add_option("--min-node-size", impute_args.cfg.min_node_size, "Minimum node size")
        ->capture_default_str();
    impute_cmd->add_option("--mtry", impute_args.cfg.mtry, "Features tried per split (0: sqrt)")
        ->capture_default_str();
    impute_cmd->add_option("--delta", impute_args.cfg.delta, "Convergence slack delta")
        ->capture_default_str();
    impute_cmd->add_option("--max-iters", impute_args.cfg.max_iters,
                           "Maximum refinement iterations")
        ->capture_default_str();
    impute_cmd->add_option("--seed", impute_args.cfg.seed, "Random seed")
        ->capture_default_str();
    impute_cmd->add_option("--mean-kind", impute_args.mean_kind,
                           "Numeric expectation: truncated_mean or raw_leaf_mean")
        ->capture_default_str();
    impute_cmd->add_option("--alpha", impute_args.cfg.alpha, "Categorical smoothing")
        ->capture_default_str();

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate copula-correlated data");
    sim_cmd->add_option("--n", sim_args.n, "Rows")->capture_default_str();
    sim_cmd->add_option("--p", sim_args.p, "Feature count")->capture_default_str();
    sim_cmd->add_option("--marginal", sim_args.marginal,
                        "normal | binom | pois | gamma | uniform")
        ->capture_default_str();
    sim_cmd->add_option("--effect", sim_args.effect, "linear | squared")->capture_default_str();
    sim_cmd->add_option("--seed", sim_args.seed, "Random seed")->capture_default_str();
    sim_cmd->add_option("--out", sim_args.out, "Output CSV")->required();

    AmputeArgs amp_args;
    auto* amp_cmd = app.add_subcommand("ampute", "Introduce missing values");
    amp_cmd->add_option("--input", amp_args.input, "Input CSV")->required();
    amp_cmd->add_option("--out", amp_args.out, "Output CSV")->required();
    amp_cmd->add_option("--mechanism", amp_args.mechanism, "MCAR | MAR | MNAR")
        ->capture_default_str();
    amp_cmd->add_option("--proportion", amp_args.proportion, "Missingness proportion")
        ->capture_default_str();
    amp_cmd->add_option("--targets", amp_args.targets,
                        "Comma-separated target column names (default: first half)");
    amp_cmd->add_option("--seed", amp_args.seed, "Random seed")->capture_default_str();

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Fit an ARF density model and save it");
    fit_cmd->add_option("--input", fit_args.input, "Training CSV")->required();
    fit_cmd->add_option("--model", fit_args.model_path, "Model file to write")->required();
    fit_cmd->add_option("--categorical", fit_args.categorical,
                        "Comma-separated categorical column names");
    fit_cmd->add_option("--trees", fit_args.trees, "Number of trees")->capture_default_str();
    fit_cmd->add_option("--min-node-size", fit_args.min_node_size, "Minimum node size")
        ->capture_default_str();
    fit_cmd->add_option("--mtry", fit_args.mtry, "Features tried per split (0: sqrt)")
        ->capture_default_str();
    fit_cmd->add_option("--delta", fit_args.delta, "Convergence slack delta")
        ->capture_default_str();
    fit_cmd->add_option("--max-iters", fit_args.max_iters, "Maximum refinement iterations")
        ->capture_default_str();
    fit_cmd->add_option("--alpha", fit_args.alpha, "Categorical smoothing")
        ->capture_default_str();
    fit_cmd->add_option("--seed", fit_args.seed, "Random seed")->capture_default_str();

    LogprobArgs logprob_args;
    auto* logprob_cmd =
        app.add_subcommand("logprob", "Per-row log-density under a saved model");
    logprob_cmd->add_option("--model", logprob_args.model_path, "Model file")->required();
    logprob_cmd->add_option("--input", logprob_args.input, "Input CSV")->required();

    BenchmarkArgs bench_args;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run a simulation benchmark grid");
    bench_cmd->add_option("--config", bench_args.config, "Benchmark config file")->required();
    bench_cmd->add_option("--out", bench_args.out, "Results CSV")->required();

    try {
        app.parse(argc, argv);
        impute_args.m_given = impute_cmd->count("--m") > 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (*impute_cmd) return run_impute(impute_args, global);
        if (*sim_cmd) return run_simulate(sim_args, global);
        if (*amp_cmd) return run_ampute(amp_args);
        if (*fit_cmd) return run_fit(fit_args, global);
        if (*logprob_cmd) return run_logprob(logprob_args);
        if (*bench_cmd) return run_benchmark_cmd(bench_args, global);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const SchemaError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
