#include "ills/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "ills/errors.hpp"

namespace ills {

namespace {

std::vector<std::vector<std::uint32_t>> probe_by_user(const DataSplit& split, std::size_t n_users) {
    std::vector<std::vector<std::uint32_t>> out(n_users);
    for (const auto& l : split.probe.links()) {
        if (l.user >= n_users) {
            throw DataError("probe link outside the score matrix");
        }
        out[l.user].push_back(l.item);  // links are item-sorted, so lists are too
    }
    return out;
}

void check_shape(const ScoreMatrix& scores, const DataSplit& split) {
    if (split.probe.n_items() != scores.n_items() || split.probe.n_users() != scores.n_users()) {
        throw DataError("split and score matrix dimensions differ");
    }
}

std::size_t count_hits(std::span<const std::uint32_t> recommended, std::span<const std::uint32_t> probe_sorted) {
    std::size_t hits = 0;
    for (auto item : recommended) {
        if (std::binary_search(probe_sorted.begin(), probe_sorted.end(), item)) {
            ++hits;
        }
    }
    return hits;
}

std::vector<RecommendationList> all_lists(const ScoreMatrix& scores, std::size_t length) {
    std::vector<RecommendationList> lists;
    lists.reserve(scores.n_users());
    for (std::size_t user = 0; user < scores.n_users(); ++user) {
        lists.push_back(recommend(scores, user, length));
    }
    return lists;
}

std::vector<std::uint32_t> prefix(const RecommendationList& list, std::size_t length) {
    return {list.items.begin(), list.items.begin() + static_cast<std::ptrdiff_t>(std::min(length, list.items.size()))};
}

struct HitRates {
    double precision = 0.0;
    double recall = 0.0;
};

HitRates hit_rates(const std::vector<RecommendationList>& lists, const std::vector<std::vector<std::uint32_t>>& probe,
                   std::size_t length) {
    if (length == 0) {
        throw std::invalid_argument("recommendation length must be at least 1");
    }
    double precision = 0.0;
    double recall = 0.0;
    std::size_t users = 0;
    for (std::size_t user = 0; user < lists.size(); ++user) {
        if (probe[user].empty()) {
            continue;
        }
        const auto hits = static_cast<double>(count_hits(prefix(lists[user], length), probe[user]));
        precision += hits / static_cast<double>(length);
        recall += hits / static_cast<double>(probe[user].size());
        ++users;
    }
    if (users == 0) {
        throw DataError("probe set is empty");
    }
    return {precision / static_cast<double>(users), recall / static_cast<double>(users)};
}

double diversity_of(const std::vector<RecommendationList>& lists, std::size_t length) {
    if (length == 0) {
        throw std::invalid_argument("recommendation length must be at least 1");
    }
    std::vector<std::vector<std::uint32_t>> sets;
    for (const auto& list : lists) {
        if (list.items.empty()) {
            continue;
        }
        auto items = prefix(list, length);
        std::sort(items.begin(), items.end());
        sets.push_back(std::move(items));
    }
    if (sets.size() < 2) {
        throw DataError("diversity needs at least 2 users with candidates");
    }
    double total = 0.0;
    std::size_t pairs = 0;
    std::vector<std::uint32_t> scratch;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            scratch.clear();
            std::set_intersection(sets[i].begin(), sets[i].end(), sets[j].begin(), sets[j].end(),
                                  std::back_inserter(scratch));
            total += 1.0 - static_cast<double>(scratch.size()) / static_cast<double>(length);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        throw std::runtime_error("cannot format number");
    }
    return {buf, ptr};
}

}  // namespace

RecommendationList recommend(const ScoreMatrix& scores, std::size_t user, std::size_t length) {
    if (length == 0) {
        throw std::invalid_argument("recommendation length must be at least 1");
    }
    if (user >= scores.n_users()) {
        throw std::out_of_range("recommend: user out of range");
    }
    const auto values = scores.column(user);
    const auto tags = scores.provenance_column(user);
    std::vector<std::uint32_t> candidates;
    for (std::size_t item = 0; item < values.size(); ++item) {
        if (tags[item] != Provenance::Observed) {
            candidates.push_back(static_cast<std::uint32_t>(item));
        }
    }
    const auto take = std::min(length, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          return values[a] > values[b] || (values[a] == values[b] && a < b);
                      });
    RecommendationList list;
    list.user = user;
    list.items.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
    for (auto item : list.items) {
        list.scores.push_back(values[item]);
    }
    return list;
}

double auc(const ScoreMatrix& scores, const DataSplit& split) {
    check_shape(scores, split);
    if (split.probe.empty()) {
        throw DataError("probe set is empty");
    }
    const auto probe = probe_by_user(split, scores.n_users());
    // Twice the win count keeps every half-tie an exact integer.
    std::uint64_t doubled_wins = 0;
    std::uint64_t pairs = 0;
    std::vector<double> negatives;
    for (std::size_t user = 0; user < scores.n_users(); ++user) {
        const auto& positives = probe[user];
        if (positives.empty()) {
            continue;
        }
        const auto values = scores.column(user);
        const auto tags = scores.provenance_column(user);
        negatives.clear();
        std::size_t p = 0;
        for (std::size_t item = 0; item < values.size(); ++item) {
            if (p < positives.size() && positives[p] == item) {
                ++p;
                continue;
            }
            if (tags[item] != Provenance::Observed) {
                negatives.push_back(values[item]);
            }
        }
        std::sort(negatives.begin(), negatives.end());
        for (auto item : positives) {
            const double s = values[item];
            const auto lower = std::lower_bound(negatives.begin(), negatives.end(), s);
            const auto upper = std::upper_bound(lower, negatives.end(), s);
            doubled_wins += 2 * static_cast<std::uint64_t>(lower - negatives.begin()) +
                            static_cast<std::uint64_t>(upper - lower);
        }
        pairs += static_cast<std::uint64_t>(positives.size()) * negatives.size();
    }
    if (pairs == 0) {
        throw DataError("graph complete: no non-link pairs to compare");
    }
    return static_cast<double>(doubled_wins) / (2.0 * static_cast<double>(pairs));
}

double precision_at(const ScoreMatrix& scores, const DataSplit& split, std::size_t length) {
    check_shape(scores, split);
    return hit_rates(all_lists(scores, length), probe_by_user(split, scores.n_users()), length).precision;
}

double recall_at(const ScoreMatrix& scores, const DataSplit& split, std::size_t length) {
    check_shape(scores, split);
    return hit_rates(all_lists(scores, length), probe_by_user(split, scores.n_users()), length).recall;
}

double diversity_at(const ScoreMatrix& scores, std::size_t length) {
    return diversity_of(all_lists(scores, length), length);
}

MetricsReport build_report(const ScoreMatrix& scores, const DataSplit& split, std::span<const std::size_t> lengths,
                           const IllsTrace& trace, const RunEcho& echo) {
    check_shape(scores, split);
    MetricsReport report;
    report.auc = auc(scores, split);
    report.nrmse_trace = trace.nrmse_per_iteration;
    report.chosen_k = trace.chosen_k;
    report.echo = echo;
    if (lengths.empty()) {
        return report;
    }
    const auto longest = *std::max_element(lengths.begin(), lengths.end());
    const auto lists = all_lists(scores, longest);
    const auto probe = probe_by_user(split, scores.n_users());
    for (auto length : lengths) {
        const auto rates = hit_rates(lists, probe, length);
        report.precision[length] = rates.precision;
        report.recall[length] = rates.recall;
        report.diversity[length] = diversity_of(lists, length);
    }
    return report;
}

std::string report_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["auc"] = report.auc;
    auto by_length = [](const std::map<std::size_t, double>& values) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (const auto& [length, v] : values) {
            obj[std::to_string(length)] = v;
        }
        return obj;
    };
    j["precision"] = by_length(report.precision);
    j["recall"] = by_length(report.recall);
    j["diversity"] = by_length(report.diversity);
    j["nrmse_trace"] = report.nrmse_trace;
    j["config"] = {{"mode", report.echo.mode},
                   {"seed", report.echo.seed},
                   {"ratio", report.echo.ratio},
                   {"threshold", report.echo.threshold},
                   {"chosen_k", report.chosen_k}};
    return j.dump(2) + "\n";
}

std::string report_csv(const MetricsReport& report) {
    std::string out = "L,precision,recall,diversity\n";
    for (const auto& [length, p] : report.precision) {
        out += std::to_string(length) + "," + format_double(p) + "," + format_double(report.recall.at(length)) + "," +
               format_double(report.diversity.at(length)) + "\n";
    }
    return out;
}

std::string trace_json(const IllsTrace& trace) {
    nlohmann::ordered_json j;
    j["chosen_k"] = trace.chosen_k;
    j["nrmse"] = trace.nrmse_per_iteration;
    j["iterations"] = trace.iterations_run;
    return j.dump(2) + "\n";
}

}  // namespace ills
