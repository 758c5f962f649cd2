#include "ills/spreading.hpp"

#include "ills/errors.hpp"

namespace ills {

namespace {

// Two sparse passes, item -> user -> item. `user_resource` and `touched` are
// scratch buffers owned by the caller so densify does not reallocate per user.
void spread_into(const BipartiteGraph& graph, std::size_t user, std::vector<double>& user_resource,
                 std::vector<std::uint32_t>& touched, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    touched.clear();
    for (const auto item : graph.profile(user)) {
        const auto audience = graph.audience(item);
        const double share = 1.0 / static_cast<double>(audience.size());
        for (const auto holder : audience) {
            if (user_resource[holder] == 0.0) {
                touched.push_back(holder);
            }
            user_resource[holder] += share;
        }
    }
    // Visit users in index order so the accumulation order is fixed.
    std::sort(touched.begin(), touched.end());
    for (const auto holder : touched) {
        const auto items = graph.profile(holder);
        const double share = user_resource[holder] / static_cast<double>(items.size());
        for (const auto item : items) {
            out[item] += share;
        }
        user_resource[holder] = 0.0;
    }
}

}  // namespace

std::vector<double> spread_user(const BipartiteGraph& graph, std::size_t user) {
    if (user >= graph.n_users()) {
        throw DataError("spread_user: user index out of range");
    }
    std::vector<double> user_resource(graph.n_users(), 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<double> out(graph.n_items(), 0.0);
    spread_into(graph, user, user_resource, touched, out);
    return out;
}

ScoreMatrix densify(const BipartiteGraph& graph) {
    if (graph.link_count() == 0) {
        throw DataError("densify: graph has no links");
    }
    const auto n = graph.n_items();
    const auto m = graph.n_users();
    ScoreMatrix scores(n, m);
    std::vector<double> user_resource(m, 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<double> column(n);
    std::vector<double> mass(m, 0.0);
    for (std::size_t user = 0; user < m; ++user) {
        spread_into(graph, user, user_resource, touched, column);
        double total = 0.0;
        for (std::size_t item = 0; item < n; ++item) {
            total += column[item];
            scores.set(item, user, column[item], column[item] > 0.0 ? Provenance::Spread : Provenance::Missing);
        }
        mass[user] = total;
        for (const auto item : graph.profile(user)) {
            scores.set(item, user, 1.0, Provenance::Observed);
        }
    }
    scores.set_spread_mass(std::move(mass));
    return scores;
}

ScoreMatrix binary_scores(const BipartiteGraph& graph) {
    ScoreMatrix scores(graph.n_items(), graph.n_users());
    for (std::size_t user = 0; user < graph.n_users(); ++user) {
        for (const auto item : graph.profile(user)) {
            scores.set(item, user, 1.0, Provenance::Observed);
        }
    }
    return scores;
}

SpreadStats spread_stats(const ScoreMatrix& scores) {
    SpreadStats stats;
    const auto total = static_cast<double>(scores.n_items()) * static_cast<double>(scores.n_users());
    const auto positive = (scores.values().array() > 0.0).count();
    stats.nonzero_fraction = total > 0.0 ? static_cast<double>(positive) / total : 0.0;
    const auto mass = scores.spread_mass();
    if (!mass.empty()) {
        stats.per_user_mass.assign(mass.begin(), mass.end());
    } else {
        stats.per_user_mass.resize(scores.n_users());
        for (std::size_t user = 0; user < scores.n_users(); ++user) {
            stats.per_user_mass[user] = scores.values().col(static_cast<Eigen::Index>(user)).sum();
        }
    }
    return stats;
}

}  // namespace ills
