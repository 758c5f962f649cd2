#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ills/dataset.hpp"
#include "ills/imputation.hpp"
#include "ills/score_matrix.hpp"

namespace ills {

struct RecommendationList {
    std::size_t user = 0;
    std::vector<std::uint32_t> items;  // score descending, ties by item index
    std::vector<double> scores;
};

// Top-L items outside the user's training profile. Fewer than L when the user
// has fewer candidates.
RecommendationList recommend(const ScoreMatrix& scores, std::size_t user, std::size_t length);

// Exact AUC over every (probe link, non-link) pair of the same user: strict
// wins count 1, ties 1/2. Non-links are pairs in neither training nor probe.
double auc(const ScoreMatrix& scores, const DataSplit& split);

// Averages over users holding at least one probe link.
double precision_at(const ScoreMatrix& scores, const DataSplit& split, std::size_t length);
double recall_at(const ScoreMatrix& scores, const DataSplit& split, std::size_t length);

// Mean over unordered user pairs of 1 - |overlap| / L between top-L lists.
// Only users with at least one candidate item take part.
double diversity_at(const ScoreMatrix& scores, std::size_t length);

struct RunEcho {
    std::uint64_t seed = 0;
    double ratio = 0.0;
    double threshold = 0.0;
    std::string mode;
};

struct MetricsReport {
    double auc = 0.0;
    std::map<std::size_t, double> precision;
    std::map<std::size_t, double> recall;
    std::map<std::size_t, double> diversity;
    std::vector<double> nrmse_trace;
    std::size_t chosen_k = 0;
    RunEcho echo;
};

// Computes each user's recommendation list once at the largest L and reuses
// its prefixes.
MetricsReport build_report(const ScoreMatrix& scores, const DataSplit& split, std::span<const std::size_t> lengths,
                           const IllsTrace& trace, const RunEcho& echo = {});

std::string report_json(const MetricsReport& report);
std::string report_csv(const MetricsReport& report);
std::string trace_json(const IllsTrace& trace);

}  // namespace ills
