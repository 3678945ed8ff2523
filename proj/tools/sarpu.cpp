// Command-line driver: generate experiment instances, train and evaluate the
// individual methods, run the full benchmark, and run the theory
// verification suites.
//
// Exit codes: 0 success, 1 usage/config (and failed verification),
// 2 data error, 3 numeric divergence.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sarpu/sarpu.hpp"

namespace fs = std::filesystem;

namespace {

struct DatasetArgs {
    std::string kind = "blobs";  // blobs | csv
    std::string csv_path;
    std::string schema_path;
    std::size_t blob_n = 1000;
    std::size_t blob_dims = 4;
    double blob_separation = 6.0;
    double blob_positive_fraction = 0.5;
};

void add_dataset_options(CLI::App* cmd, DatasetArgs& args) {
    cmd->add_option("--dataset", args.kind, "dataset source: blobs or csv")
        ->check(CLI::IsMember({"blobs", "csv"}))
        ->capture_default_str();
    cmd->add_option("--csv", args.csv_path, "csv file (with --dataset csv)");
    cmd->add_option("--schema", args.schema_path, "schema file (name:kind lines)");
    cmd->add_option("--blob-n", args.blob_n, "synthetic blob sample count")
        ->capture_default_str();
    cmd->add_option("--blob-dims", args.blob_dims, "synthetic blob dimensionality")
        ->capture_default_str();
    cmd->add_option("--blob-separation", args.blob_separation,
                    "distance between blob centres before scaling")
        ->capture_default_str();
    cmd->add_option("--blob-positive-fraction", args.blob_positive_fraction,
                    "positive class fraction for blobs")
        ->capture_default_str();
}

void add_sim_options(CLI::App* cmd, sarpu::SimulationConfig& cfg) {
    cmd->add_option("--k-clusters", cfg.k_clusters, "clusters for propensity attribute sampling")
        ->capture_default_str();
    cmd->add_option("--k-prop-attrs", cfg.k_prop_attrs, "number of binary propensity attributes")
        ->capture_default_str();
    cmd->add_option("--p-low", cfg.p_low, "propensity lower endpoint")->capture_default_str();
    cmd->add_option("--p-high", cfg.p_high, "propensity upper endpoint")->capture_default_str();
    cmd->add_option("--n-splits", cfg.n_splits, "train/test splits")->capture_default_str();
    cmd->add_option("--n-labelings", cfg.n_labelings, "labelings per split")
        ->capture_default_str();
    cmd->add_option("--test-fraction", cfg.test_fraction, "test set fraction")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
}

// Relative CSV paths fall back to $SARPU_DATA_DIR when not found directly.
std::string resolve_data_path(const std::string& path) {
    if (path.empty() || fs::exists(path)) return path;
    if (const char* dir = std::getenv("SARPU_DATA_DIR"); dir != nullptr) {
        const fs::path candidate = fs::path(dir) / path;
        if (fs::exists(candidate)) return candidate.string();
    }
    return path;
}

sarpu::LabeledDataset load_dataset(const DatasetArgs& args, std::uint64_t seed) {
    if (args.kind == "csv") {
        if (args.csv_path.empty() || args.schema_path.empty()) {
            throw CLI::ValidationError("--dataset csv requires --csv and --schema");
        }
        const auto loaded = sarpu::load_csv(resolve_data_path(args.csv_path),
                                            resolve_data_path(args.schema_path));
        if (loaded.unknown_categorical > 0) {
            std::cerr << "warning: " << loaded.unknown_categorical
                      << " unknown categorical values mapped to zero\n";
        }
        return loaded.data;
    }
    return sarpu::make_blobs(args.blob_n, args.blob_dims, args.blob_separation, seed,
                             args.blob_positive_fraction);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw sarpu::DataError("cannot write " + path.string());
    out << content;
}

int run_generate(const DatasetArgs& data_args, const sarpu::SimulationConfig& sim,
                 const std::string& out_dir) {
    const sarpu::LabeledDataset data = load_dataset(data_args, sim.seed);
    const sarpu::ExperimentSet set = sarpu::make_experiment_instances(data, sim);

    fs::create_directories(out_dir);
    std::vector<std::string> files;
    std::vector<int> tests_written(static_cast<std::size_t>(sim.n_splits), 0);
    for (const auto& inst : set.instances) {
        if (!tests_written[static_cast<std::size_t>(inst.split)]) {
            const std::string name = "test_s" + std::to_string(inst.split) + ".eval";
            write_file(fs::path(out_dir) / name, sarpu::eval_to_string(inst.test));
            files.push_back(name);
            tests_written[static_cast<std::size_t>(inst.split)] = 1;
        }
        const std::string name = "train_s" + std::to_string(inst.split) + "_l" +
                                 std::to_string(inst.labeling) + ".pu";
        write_file(fs::path(out_dir) / name, sarpu::pu_to_string(inst.train));
        files.push_back(name);
    }

    std::ostringstream manifest;
    manifest << sarpu::simulation_manifest(sim, set.attachment);
    manifest << "files " << files.size();
    for (const auto& f : files) manifest << " " << f;
    manifest << "\n";
    write_file(fs::path(out_dir) / "manifest.txt", manifest.str());

    std::cout << "wrote " << set.instances.size() << " instances (" << files.size()
              << " files) to " << out_dir << "\n";
    return 0;
}

int run_train(const std::string& method_name_arg, const std::string& in_path,
              const std::string& out_prefix, const sarpu::MethodOptions& opt) {
    const sarpu::Method method = sarpu::parse_method(method_name_arg);
    const sarpu::PUDataset pu = sarpu::load_pu(resolve_data_path(in_path));

    if (method == sarpu::Method::SarEm) {
        // run EM directly so the trace can be persisted
        const sarpu::EMResult em = sarpu::run_em(pu, opt.em);
        sarpu::save_model(out_prefix + ".f.model", em.classifier);
        sarpu::save_model(out_prefix + ".e.model", em.propensity);
        std::ostringstream trace;
        trace << sarpu::em_trace_header() << "\n";
        for (const auto& row : em.trace) trace << sarpu::em_trace_line(row) << "\n";
        write_file(out_prefix + ".trace.tsv", trace.str());
        std::cout << "sar-em: " << em.iterations << " iterations, "
                  << (em.converged ? "converged" : "hit max_iters") << ", final loglik "
                  << sarpu::format_double(em.trace.back().loglik) << "\n";
        return 0;
    }

    const sarpu::TrainedMethod tm = sarpu::train_method(method, pu, opt);
    sarpu::save_model(out_prefix + ".f.model", tm.classifier);
    switch (tm.ekind) {
        case sarpu::TrainedMethod::EKind::Constant: {
            std::ostringstream os;
            os << "c " << sarpu::format_double(tm.e_constant) << "\n";
            write_file(out_prefix + ".c.txt", os.str());
            std::cout << "estimated label frequency c = "
                      << sarpu::format_double(tm.e_constant) << "\n";
            break;
        }
        case sarpu::TrainedMethod::EKind::Stratified:
            write_file(out_prefix + ".strata.tsv", sarpu::stratification_table(*tm.strat));
            std::cout << tm.strat->strata.size() << " strata\n";
            break;
        default:
            break;
    }
    std::cout << "wrote " << out_prefix << ".f.model\n";
    return 0;
}

int run_evaluate(const std::string& classifier_path, const std::string& test_path,
                 const std::string& propensity_path, const std::vector<std::string>& metrics,
                 const std::string& out_path) {
    const sarpu::LinearModel f = sarpu::load_model(resolve_data_path(classifier_path));
    const sarpu::EvalDataset test = sarpu::load_eval(resolve_data_path(test_path));
    const auto yhat = sarpu::predict_proba(f, test.features);

    std::vector<std::pair<std::string, double>> values;
    auto want = [&](const std::string& m) {
        return metrics.empty() ||
               std::find(metrics.begin(), metrics.end(), m) != metrics.end();
    };
    if (want("mse_f")) values.emplace_back("mse_f", sarpu::mse_prob(yhat, test.classes));
    if (want("roc_auc_f")) values.emplace_back("roc_auc_f", sarpu::roc_auc(yhat, test.classes));
    if (!propensity_path.empty() && want("mse_e")) {
        const sarpu::LinearModel e = sarpu::load_model(resolve_data_path(propensity_path));
        const sarpu::Matrix xe =
            sarpu::select_cols(test.features, test.propensity_attr_indices);
        const auto e_hat = sarpu::predict_proba(e, xe);
        values.emplace_back("mse_e",
                            sarpu::mse_propensity(e_hat, test.true_propensity, test.classes));
    }

    std::ostringstream os;
    os << "metric\tvalue\n";
    for (const auto& [name, v] : values) os << name << "\t" << sarpu::format_double(v) << "\n";
    std::cout << os.str();
    if (!out_path.empty()) write_file(out_path, os.str());
    return 0;
}

int run_bench(const DatasetArgs& data_args, const sarpu::SimulationConfig& sim,
              const std::string& methods_csv, const sarpu::BenchmarkOptions& opt,
              const std::string& out_dir) {
    std::vector<sarpu::Method> methods;
    if (methods_csv == "all") {
        methods = sarpu::all_methods();
    } else {
        std::stringstream ss(methods_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) methods.push_back(sarpu::parse_method(tok));
        }
    }
    if (methods.empty()) throw CLI::ValidationError("--methods resolved to an empty list");

    const sarpu::LabeledDataset data = load_dataset(data_args, sim.seed);
    const sarpu::ExperimentSet set = sarpu::make_experiment_instances(data, sim);
    const auto results = sarpu::run_benchmark(set, methods, opt);

    const std::string dataset_name =
        data_args.kind == "csv" ? fs::path(data_args.csv_path).stem().string() : "blobs";
    const std::string summary = sarpu::benchmark_summary_table(dataset_name, results);
    const std::string longform = sarpu::benchmark_long_table(dataset_name, results);
    std::cout << summary;
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "summary.tsv", summary);
        write_file(fs::path(out_dir) / "long.tsv", longform);
    }
    return 0;
}

int run_verify(const std::string& suite, std::uint64_t seed, const std::string& mutate) {
    std::vector<sarpu::CheckResult> checks;
    const bool props = suite == "props" || suite == "all";
    const bool em = suite == "em" || suite == "all";
    const bool bounds = suite == "bounds" || suite == "all";

    if (props) {
        sarpu::PwEstimator estimator = sarpu::default_pw_estimator;
        if (mutate == "pw-sign") {
            estimator = [](std::span<const double> yhat, std::span<const int> s,
                           std::span<const double> e, const sarpu::CostSpec& cost) {
                return -sarpu::pw_risk(yhat, s, e, cost).value;
            };
        } else if (!mutate.empty()) {
            throw CLI::ValidationError("unknown --mutate value: " + mutate);
        }
        checks.push_back(sarpu::verify_unbiasedness(100, 12, seed, 1e-12, estimator));
        checks.push_back(sarpu::verify_bias(100, 12, seed, 1e-12));
        checks.push_back(sarpu::verify_estep_bayes(seed));
        checks.push_back(sarpu::verify_expected_risk_degeneracy(seed));
        checks.push_back(sarpu::verify_gradients(20, seed));
    }
    if (em) checks.push_back(sarpu::verify_em_fixed_point(seed));
    if (bounds) {
        checks.push_back(sarpu::verify_bound_coverage(200, 10000, {0.05, 0.1}, seed));
        checks.push_back(sarpu::verify_erm_bound(200, 16, 1000, 0.05, seed));
    }

    bool all_passed = true;
    for (const auto& c : checks) {
        std::cout << (c.passed ? "[PASS] " : "[FAIL] ") << c.name << ": " << c.detail << "\n";
        all_passed = all_passed && c.passed;
    }
    return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"positive-unlabeled learning toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write experiment instances and a manifest");
    DatasetArgs gen_data;
    sarpu::SimulationConfig gen_sim;
    std::string gen_out = "out";
    add_dataset_options(gen, gen_data);
    add_sim_options(gen, gen_sim);
    gen->add_option("--out", gen_out, "output directory")->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "train one method on a PU instance");
    std::string train_method, train_in, train_out = "model";
    sarpu::MethodOptions train_opt;
    train->add_option("--method", train_method,
                      "naive|scar-en|sar-strat|sar-em|sar-true-e|supervised")
        ->required();
    train->add_option("--in", train_in, "PU instance file")->required();
    train->add_option("--out", train_out, "output file prefix")->capture_default_str();
    train->add_option("--l2", train_opt.train.l2_strength,
                      "L2 strength for baseline fits (-1 = 1/n)");
    train->add_option("--em-max-iters", train_opt.em.max_iters, "EM iteration cap")
        ->capture_default_str();
    train->add_option("--e-floor", train_opt.e_floor, "propensity floor for 1/e weights")
        ->capture_default_str();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "score trained models on a test set");
    std::string ev_model, ev_test, ev_prop, ev_out;
    std::vector<std::string> ev_metrics;
    ev->add_option("--model", ev_model, "classifier model file")->required();
    ev->add_option("--test", ev_test, "evaluation dataset file")->required();
    ev->add_option("--propensity-model", ev_prop, "propensity model file (for mse_e)");
    ev->add_option("--metrics", ev_metrics, "subset of mse_f roc_auc_f mse_e");
    ev->add_option("--out", ev_out, "also write the metric table to this file");

    // bench
    auto* bench = app.add_subcommand("bench", "run the full method comparison");
    DatasetArgs bench_data;
    sarpu::SimulationConfig bench_sim;
    sarpu::BenchmarkOptions bench_opt;
    std::string bench_methods = "all";
    std::string bench_out;
    add_dataset_options(bench, bench_data);
    add_sim_options(bench, bench_sim);
    bench->add_option("--methods", bench_methods, "comma-separated method list or 'all'")
        ->capture_default_str();
    bench->add_option("--jobs", bench_opt.jobs, "concurrent training units")
        ->capture_default_str();
    bench->add_flag("--propensity-mse-on-train", bench_opt.propensity_mse_on_train,
                    "score propensity models on train positives instead of test");
    bench->add_option("--em-max-iters", bench_opt.method_options.em.max_iters,
                      "EM iteration cap")
        ->capture_default_str();
    bench->add_option("--out", bench_out, "directory for summary.tsv and long.tsv");

    // verify
    auto* verify = app.add_subcommand("verify", "run the theory verification suites");
    std::string verify_suite = "all";
    std::uint64_t verify_seed = 7;
    std::string verify_mutate;
    verify->add_option("--suite", verify_suite, "props|em|bounds|all")
        ->check(CLI::IsMember({"props", "em", "bounds", "all"}))
        ->capture_default_str();
    verify->add_option("--seed", verify_seed, "verification seed")->capture_default_str();
    verify->add_option("--mutate", verify_mutate, "inject a known defect (testing the tests)")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return run_generate(gen_data, gen_sim, gen_out);
        if (train->parsed()) return run_train(train_method, train_in, train_out, train_opt);
        if (ev->parsed()) return run_evaluate(ev_model, ev_test, ev_prop, ev_metrics, ev_out);
        if (bench->parsed()) {
            return run_bench(bench_data, bench_sim, bench_methods, bench_opt, bench_out);
        }
        if (verify->parsed()) return run_verify(verify_suite, verify_seed, verify_mutate);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const sarpu::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const sarpu::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
