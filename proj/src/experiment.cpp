#include "ills/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ills/errors.hpp"
#include "ills/rng.hpp"
#include "ills/spreading.hpp"

namespace ills {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out << text;
}

void say(const ProgressFn& progress, std::string_view message) {
    if (progress) {
        progress(message);
    }
}

std::string trim_copy(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_commas(std::string_view text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = text.find(',', start);
        const auto piece = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        parts.push_back(trim_copy(piece));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return parts;
}

char parse_delimiter(const std::string& text) {
    if (text == "\\t" || text == "tab") {
        return '\t';
    }
    if (text.size() != 1) {
        throw ConfigError("delimiter must be a single character (or \\t)");
    }
    return text[0];
}

std::size_t baseline_k(const ExperimentConfig& config, std::size_t n_users) {
    const auto k = std::max<long long>(1, std::llround(config.baseline_k_fraction * static_cast<double>(n_users)));
    return std::min<std::size_t>(static_cast<std::size_t>(k), n_users > 1 ? n_users - 1 : 1);
}

}  // namespace

Mode parse_mode(std::string_view text) {
    if (text == "probs-only") {
        return Mode::ProbsOnly;
    }
    if (text == "ills") {
        return Mode::Ills;
    }
    if (text == "raw-ills") {
        return Mode::RawIlls;
    }
    throw ConfigError("unknown mode '" + std::string(text) + "' (expected probs-only, ills or raw-ills)");
}

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::ProbsOnly:
            return "probs-only";
        case Mode::Ills:
            return "ills";
        case Mode::RawIlls:
            return "raw-ills";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    if (input.empty()) {
        throw ConfigError("no input file given");
    }
    if (!std::isfinite(threshold)) {
        throw ConfigError("threshold must be finite");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("ratio must lie in (0, 1)");
    }
    if (!(baseline_k_fraction > 0.0 && baseline_k_fraction <= 1.0)) {
        throw ConfigError("baseline_k must lie in (0, 1]");
    }
    if (lists.empty()) {
        throw ConfigError("lists must not be empty");
    }
    for (auto l : lists) {
        if (l == 0) {
            throw ConfigError("recommendation lengths must be at least 1");
        }
    }
    if (target_density && !(*target_density > 0.0 && *target_density <= 1.0)) {
        throw ConfigError("target_density must lie in (0, 1]");
    }
    ills_config().validate();
}

IllsConfig ExperimentConfig::ills_config() const {
    IllsConfig c;
    c.k_grid = k_grid;
    c.full_k_scan = full_k_scan;
    c.max_iterations = max_iterations;
    c.convergence_tol = convergence_tol;
    c.mask_fraction = mask_fraction;
    c.seed = derive_seed(seed, Stream::Mask);
    return c;
}

std::vector<double> parse_fraction_list(std::string_view text) {
    std::vector<double> out;
    for (const auto& part : split_commas(text)) {
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
            throw ConfigError("bad number '" + part + "' in list");
        }
        out.push_back(v);
    }
    return out;
}

std::vector<std::size_t> parse_length_list(std::string_view text) {
    std::vector<std::size_t> out;
    for (const auto& part : split_commas(text)) {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
            throw ConfigError("bad length '" + part + "' in list");
        }
        out.push_back(v);
    }
    return out;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base) {
    static const std::set<std::string> known{"input",     "delimiter",     "threshold", "ratio",        "seed",
                                             "mode",      "k_grid",        "full_k_scan", "baseline_k", "max_iters",
                                             "tol",       "mask_fraction", "lists",     "out",          "target_density",
                                             "dump_scores"};
    if (!j.is_object()) {
        throw ConfigError("config file must hold a JSON object");
    }
    try {
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) {
                throw ConfigError("unknown config key '" + key + "'");
            }
        }
        if (j.contains("input")) base.input = j.at("input").get<std::string>();
        if (j.contains("delimiter")) base.delimiter = parse_delimiter(j.at("delimiter").get<std::string>());
        if (j.contains("threshold")) base.threshold = j.at("threshold").get<double>();
        if (j.contains("ratio")) base.ratio = j.at("ratio").get<double>();
        if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("mode")) base.mode = parse_mode(j.at("mode").get<std::string>());
        if (j.contains("k_grid")) {
            const auto& g = j.at("k_grid");
            base.k_grid = g.is_string() ? parse_fraction_list(g.get<std::string>()) : g.get<std::vector<double>>();
        }
        if (j.contains("full_k_scan")) base.full_k_scan = j.at("full_k_scan").get<bool>();
        if (j.contains("baseline_k")) base.baseline_k_fraction = j.at("baseline_k").get<double>();
        if (j.contains("max_iters")) base.max_iterations = j.at("max_iters").get<std::size_t>();
        if (j.contains("tol")) base.convergence_tol = j.at("tol").get<double>();
        if (j.contains("mask_fraction")) base.mask_fraction = j.at("mask_fraction").get<double>();
        if (j.contains("lists")) {
            const auto& l = j.at("lists");
            base.lists = l.is_string() ? parse_length_list(l.get<std::string>()) : l.get<std::vector<std::size_t>>();
        }
        if (j.contains("out")) base.out = j.at("out").get<std::string>();
        if (j.contains("target_density")) base.target_density = j.at("target_density").get<double>();
        if (j.contains("dump_scores")) base.dump_scores = j.at("dump_scores").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    return config_from_json(j, std::move(base));
}

PreparedData prepare_data(const ExperimentConfig& config) {
    const auto records = load_ratings(config.input, config.delimiter);
    PreparedData prepared;
    prepared.data = binarize(records, config.threshold);
    if (config.target_density) {
        prepared.data =
            subsample_to_density(prepared.data, *config.target_density, derive_seed(config.seed, Stream::Subsample));
    }
    prepared.split = split_train_probe(prepared.data.links, config.ratio, derive_seed(config.seed, Stream::Split));
    return prepared;
}

ExperimentResult run_pipeline(const ExperimentConfig& config, const PreparedData& prepared,
                              const ProgressFn& progress) {
    const auto graph = build_graph(prepared.split.training);
    ExperimentResult result;
    switch (config.mode) {
        case Mode::ProbsOnly:
            say(progress, "spreading");
            result.scores = densify(graph);
            break;
        case Mode::Ills: {
            say(progress, "spreading");
            const auto spread = densify(graph);
            say(progress, "imputing");
            auto ills = run_ills(spread, config.ills_config());
            result.scores = std::move(ills.scores);
            result.trace = std::move(ills.trace);
            break;
        }
        case Mode::RawIlls: {
            // No continuous truths exist on the binary matrix, so one
            // fixed-K pass runs and no NRMSE is traced.
            const auto k = baseline_k(config, graph.n_users());
            say(progress, "imputing binary matrix");
            ImputeOptions options;
            options.basis = SimilarityBasis::Adjacency;
            result.scores = impute_iteration(binary_scores(graph), k, options);
            result.trace.chosen_k = k;
            break;
        }
    }
    say(progress, "evaluating");
    const RunEcho echo{config.seed, config.ratio, config.threshold, std::string(to_string(config.mode))};
    result.report = build_report(result.scores, prepared.split, config.lists, result.trace, echo);
    return result;
}

MetricsReport run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    say(progress, "loading " + config.input.string());
    const auto prepared = prepare_data(config);
    auto result = run_pipeline(config, prepared, progress);
    std::filesystem::create_directories(config.out);
    write_text(config.out / "report.json", report_json(result.report));
    write_text(config.out / "metrics.csv", report_csv(result.report));
    write_text(config.out / "trace.json", trace_json(result.trace));
    if (config.dump_scores) {
        write_score_dump(config.out / "scores.bin", config.out / "provenance.bin", result.scores);
    }
    return result.report;
}

std::string k_curve_csv(std::span<const KCurvePoint> curve) {
    std::string out = "K,K_fraction,NRMSE\n";
    for (const auto& p : curve) {
        char buf[64];
        auto [e1, ec1] = std::to_chars(buf, buf + sizeof(buf), p.fraction);
        std::string fraction(buf, e1);
        auto [e2, ec2] = std::to_chars(buf, buf + sizeof(buf), p.nrmse);
        out += std::to_string(p.k) + "," + fraction + "," + std::string(buf, e2) + "\n";
    }
    return out;
}

std::vector<KCurvePoint> sweep_k(const ExperimentConfig& config, const ProgressFn& progress) {
    config.validate();
    if (config.mode != Mode::Ills) {
        throw ConfigError("sweep-k requires mode ills");
    }
    say(progress, "loading " + config.input.string());
    const auto prepared = prepare_data(config);
    say(progress, "spreading");
    const auto spread = densify(build_graph(prepared.split.training));
    say(progress, "scanning K");
    auto curve = k_curve(spread, config.ills_config());
    std::filesystem::create_directories(config.out);
    write_text(config.out / "sweep_k.csv", k_curve_csv(curve));
    return curve;
}

DatasetStats dataset_stats(const ExperimentConfig& config) {
    const auto prepared = prepare_data(config);
    DatasetStats stats;
    stats.users = prepared.data.links.n_users();
    stats.items = prepared.data.links.n_items();
    stats.links = prepared.data.links.size();
    stats.density = density(prepared.data.links);
    stats.training_links = prepared.split.training.size();
    stats.spread_density_training = spread_stats(densify(build_graph(prepared.split.training))).nonzero_fraction;
    stats.spread_density_all_links = spread_stats(densify(build_graph(prepared.data.links))).nonzero_fraction;
    return stats;
}

std::string stats_json(const DatasetStats& stats) {
    nlohmann::ordered_json j;
    j["users"] = stats.users;
    j["items"] = stats.items;
    j["links"] = stats.links;
    j["density"] = stats.density;
    j["training_links"] = stats.training_links;
    j["spread_density_training"] = stats.spread_density_training;
    j["spread_density_all_links"] = stats.spread_density_all_links;
    return j.dump(2) + "\n";
}

DataSplit write_experiment_split(const ExperimentConfig& config) {
    const auto prepared = prepare_data(config);
    write_split(config.out, prepared.split, prepared.data.index);
    return prepared.split;
}

}  // namespace ills
