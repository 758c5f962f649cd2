#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ills/dataset.hpp"
#include "ills/evaluation.hpp"
#include "ills/imputation.hpp"

namespace ills {

enum class Mode { ProbsOnly, Ills, RawIlls };

Mode parse_mode(std::string_view text);
std::string_view to_string(Mode mode);

struct ExperimentConfig {
    std::filesystem::path input;
    char delimiter = '\t';
    double threshold = 3.0;  // 6.0 for 10-point scales
    double ratio = 0.1;
    std::uint64_t seed = 0;
    Mode mode = Mode::Ills;
    std::vector<double> k_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    bool full_k_scan = false;
    double baseline_k_fraction = 0.3;
    std::size_t max_iterations = 10;
    double convergence_tol = 1e-4;
    double mask_fraction = 0.01;
    std::vector<std::size_t> lists{10, 20, 50, 100};
    std::filesystem::path out = "out";
    std::optional<double> target_density;  // subsample links before splitting
    bool dump_scores = false;

    void validate() const;
    IllsConfig ills_config() const;
};

// Flat JSON keys mirroring the CLI flags: input, delimiter, threshold, ratio,
// seed, mode, k_grid, full_k_scan, baseline_k, max_iters, tol, mask_fraction,
// lists, out, target_density, dump_scores. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

std::vector<double> parse_fraction_list(std::string_view text);
std::vector<std::size_t> parse_length_list(std::string_view text);

struct PreparedData {
    IndexedLinks data;
    DataSplit split;
};

// Load, binarize, optionally subsample, split.
PreparedData prepare_data(const ExperimentConfig& config);

using ProgressFn = std::function<void(std::string_view)>;

struct ExperimentResult {
    MetricsReport report;
    IllsTrace trace;
    ScoreMatrix scores;
};

// Runs the configured pipeline without touching the filesystem beyond input.
ExperimentResult run_pipeline(const ExperimentConfig& config, const PreparedData& prepared,
                              const ProgressFn& progress = {});

// Full experiment: writes report.json, metrics.csv and trace.json (plus the
// optional score dump) into config.out.
MetricsReport run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

// NRMSE-vs-K curve on the spread scores; writes sweep_k.csv.
std::vector<KCurvePoint> sweep_k(const ExperimentConfig& config, const ProgressFn& progress = {});
std::string k_curve_csv(std::span<const KCurvePoint> curve);

struct DatasetStats {
    std::size_t users = 0;
    std::size_t items = 0;
    std::size_t links = 0;
    double density = 0.0;
    std::size_t training_links = 0;
    double spread_density_training = 0.0;   // nonzero fraction after spreading the training split
    double spread_density_all_links = 0.0;  // same, spreading every link
};

DatasetStats dataset_stats(const ExperimentConfig& config);
std::string stats_json(const DatasetStats& stats);

// Writes the split files for config.out.
DataSplit write_experiment_split(const ExperimentConfig& config);

}  // namespace ills
