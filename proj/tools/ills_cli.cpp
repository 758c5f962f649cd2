// Command-line driver: run | split | sweep-k | stats.

#include <CLI11.hpp>

#include <chrono>
#include <iomanip>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ills/errors.hpp"
#include "ills/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDataError = 2, kNumericError = 3 };

struct Flags {
    std::string config;
    std::string input;
    std::string delimiter;
    double threshold = 0.0;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    std::string mode;
    std::string k_grid;
    bool full_k_scan = false;
    double baseline_k = 0.0;
    std::size_t max_iters = 0;
    double tol = 0.0;
    double mask_fraction = 0.0;
    std::string lists;
    std::string out;
    double target_density = 0.0;
    bool dump_scores = false;
    bool quiet = false;
};

struct Bound {
    CLI::Option* config;
    CLI::Option* input;
    CLI::Option* delimiter;
    CLI::Option* threshold;
    CLI::Option* ratio;
    CLI::Option* seed;
    CLI::Option* mode;
    CLI::Option* k_grid;
    CLI::Option* full_k_scan;
    CLI::Option* baseline_k;
    CLI::Option* max_iters;
    CLI::Option* tol;
    CLI::Option* mask_fraction;
    CLI::Option* lists;
    CLI::Option* out;
    CLI::Option* target_density;
    CLI::Option* dump_scores;
};

Bound add_flags(CLI::App* cmd, Flags& f) {
    Bound b{};
    b.config = cmd->add_option("--config", f.config, "JSON config file; flags override its values");
    b.input = cmd->add_option("--input", f.input, "ratings file: user, item, rating[, timestamp] per line");
    b.delimiter = cmd->add_option("--delimiter", f.delimiter, "field delimiter (default tab; \\t accepted)");
    b.threshold = cmd->add_option("--threshold", f.threshold, "minimum rating that counts as a link (default 3)");
    b.ratio = cmd->add_option("--ratio", f.ratio, "probe fraction (default 0.1)");
    b.seed = cmd->add_option("--seed", f.seed, "experiment seed (default 0)");
    b.mode = cmd->add_option("--mode", f.mode, "probs-only | ills | raw-ills (default ills)");
    b.k_grid = cmd->add_option("--k-grid", f.k_grid, "comma-separated user fractions for the K scan");
    b.full_k_scan = cmd->add_flag("--full-k-scan", f.full_k_scan, "scan every K in 1..m-1");
    b.baseline_k = cmd->add_option("--baseline-k", f.baseline_k, "K as a user fraction in raw-ills mode (default 0.3)");
    b.max_iters = cmd->add_option("--max-iters", f.max_iters, "maximum imputation iterations (default 10)");
    b.tol = cmd->add_option("--tol", f.tol, "NRMSE change that counts as converged (default 1e-4)");
    b.mask_fraction = cmd->add_option("--mask-fraction", f.mask_fraction,
                                      "share of spread entries held out for NRMSE (default 0.01)");
    b.lists = cmd->add_option("--lists", f.lists, "recommendation lengths (default 10,20,50,100)");
    b.out = cmd->add_option("--out", f.out, "output directory (default out)");
    b.target_density = cmd->add_option("--target-density", f.target_density,
                                       "subsample links to this density before splitting");
    b.dump_scores = cmd->add_flag("--dump-scores", f.dump_scores, "write scores.bin and provenance.bin");
    cmd->add_flag("-q,--quiet", f.quiet, "no progress messages");
    return b;
}

ills::ExperimentConfig resolve(const Flags& f, const Bound& b) {
    ills::ExperimentConfig c;
    if (b.config->count()) {
        c = ills::load_config(f.config, c);
    }
    if (b.input->count()) c.input = f.input;
    if (b.delimiter->count()) {
        if (f.delimiter == "\\t" || f.delimiter == "tab") {
            c.delimiter = '\t';
        } else if (f.delimiter.size() == 1) {
            c.delimiter = f.delimiter[0];
        } else {
            throw ills::ConfigError("delimiter must be a single character (or \\t)");
        }
    }
    if (b.threshold->count()) c.threshold = f.threshold;
    if (b.ratio->count()) c.ratio = f.ratio;
    if (b.seed->count()) c.seed = f.seed;
    if (b.mode->count()) c.mode = ills::parse_mode(f.mode);
    if (b.k_grid->count()) c.k_grid = ills::parse_fraction_list(f.k_grid);
    if (b.full_k_scan->count()) c.full_k_scan = f.full_k_scan;
    if (b.baseline_k->count()) c.baseline_k_fraction = f.baseline_k;
    if (b.max_iters->count()) c.max_iterations = f.max_iters;
    if (b.tol->count()) c.convergence_tol = f.tol;
    if (b.mask_fraction->count()) c.mask_fraction = f.mask_fraction;
    if (b.lists->count()) c.lists = ills::parse_length_list(f.lists);
    if (b.out->count()) c.out = f.out;
    if (b.target_density->count()) c.target_density = f.target_density;
    if (b.dump_scores->count()) c.dump_scores = f.dump_scores;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-step recommender: probabilistic spreading followed by iterative local least squares"};
    app.require_subcommand(1);

    Flags run_flags, split_flags, sweep_flags, stats_flags;
    auto* run_cmd = app.add_subcommand("run", "full pipeline: split, spread, impute, evaluate");
    auto* split_cmd = app.add_subcommand("split", "persist the training/probe split");
    auto* sweep_cmd = app.add_subcommand("sweep-k", "NRMSE versus K curve");
    auto* stats_cmd = app.add_subcommand("stats", "dataset density before and after spreading");
    const auto run_bound = add_flags(run_cmd, run_flags);
    const auto split_bound = add_flags(split_cmd, split_flags);
    const auto sweep_bound = add_flags(sweep_cmd, sweep_flags);
    const auto stats_bound = add_flags(stats_cmd, stats_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    const auto started = std::chrono::steady_clock::now();
    auto progress_for = [&](bool quiet) -> ills::ProgressFn {
        if (quiet) {
            return {};
        }
        return [started](std::string_view message) {
            const auto elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            std::cerr << "[" << std::fixed << std::setprecision(1) << elapsed << "s] " << message << '\n';
        };
    };

    try {
        if (run_cmd->parsed()) {
            const auto config = resolve(run_flags, run_bound);
            const auto report = ills::run_experiment(config, progress_for(run_flags.quiet));
            std::cout << ills::report_json(report);
        } else if (split_cmd->parsed()) {
            const auto config = resolve(split_flags, split_bound);
            const auto split = ills::write_experiment_split(config);
            std::cout << "training " << split.training.size() << " links, probe " << split.probe.size()
                      << " links -> " << config.out.string() << '\n';
        } else if (sweep_cmd->parsed()) {
            const auto config = resolve(sweep_flags, sweep_bound);
            const auto curve = ills::sweep_k(config, progress_for(sweep_flags.quiet));
            std::cout << ills::k_curve_csv(curve);
        } else if (stats_cmd->parsed()) {
            const auto config = resolve(stats_flags, stats_bound);
            const auto stats = ills::dataset_stats(config);
            const auto text = ills::stats_json(stats);
            std::filesystem::create_directories(config.out);
            std::ofstream(config.out / "stats.json") << text;
            std::cout << text;
        }
    } catch (const ills::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ills::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kNumericError;
    } catch (const ills::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kOk;
}
