#pragma once

#include <vector>

#include "ills/dataset.hpp"
#include "ills/score_matrix.hpp"

namespace ills {

// Probabilistic spreading for one user. Every item in the user's profile
// starts with one unit of resource; each item splits its resource evenly
// among its users, and each user splits what it received evenly among its
// items. Items more than two hops away from the profile end at exactly 0.
std::vector<double> spread_user(const BipartiteGraph& graph, std::size_t user);

// Column i holds spread_user(graph, i); training links are then pinned to 1
// and tagged Observed, other positive entries are Spread, exact zeros Missing.
ScoreMatrix densify(const BipartiteGraph& graph);

// The binary adjacency as a score matrix: training links Observed at 1,
// everything else Missing at 0. Input for imputation without spreading.
ScoreMatrix binary_scores(const BipartiteGraph& graph);

struct SpreadStats {
    double nonzero_fraction = 0.0;
    std::vector<double> per_user_mass;
};

SpreadStats spread_stats(const ScoreMatrix& scores);

}  // namespace ills
