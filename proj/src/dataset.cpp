#include "ills/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <string_view>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ills/errors.hpp"
#include "ills/rng.hpp"

namespace ills {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end) {
        return std::nullopt;
    }
    return value;
}

// Drops users/items without links and renumbers the survivors in their
// previous relative order.
IndexedLinks compact(std::span<const Link> links, const IndexMap& index, std::size_t n_items,
                     std::size_t n_users) {
    constexpr auto unset = static_cast<std::uint32_t>(-1);
    std::vector<std::uint32_t> item_map(n_items, unset);
    std::vector<std::uint32_t> user_map(n_users, unset);
    for (const auto& l : links) {
        item_map[l.item] = 0;
        user_map[l.user] = 0;
    }
    IndexedLinks out;
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < n_items; ++i) {
        if (item_map[i] != unset) {
            item_map[i] = next++;
            out.index.item_ids.push_back(index.item_ids.at(i));
        }
    }
    next = 0;
    for (std::size_t u = 0; u < n_users; ++u) {
        if (user_map[u] != unset) {
            user_map[u] = next++;
            out.index.user_ids.push_back(index.user_ids.at(u));
        }
    }
    std::vector<Link> renumbered;
    renumbered.reserve(links.size());
    for (const auto& l : links) {
        renumbered.push_back({item_map[l.item], user_map[l.user]});
    }
    out.links = LinkSet(std::move(renumbered), out.index.item_ids.size(), out.index.user_ids.size());
    return out;
}

void write_links(const std::filesystem::path& path, const LinkSet& links) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    for (const auto& l : links.links()) {
        out << l.item << ' ' << l.user << '\n';
    }
}

LinkSet read_links(const std::filesystem::path& path, std::size_t n_items, std::size_t n_users) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot read " + path.string());
    }
    std::vector<Link> links;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(trim(line), ' ');
        if (fields.size() != 2) {
            throw ParseError(line_no, "expected \"item user\" in " + path.string());
        }
        const auto item = parse_number<std::uint32_t>(fields[0]);
        const auto user = parse_number<std::uint32_t>(fields[1]);
        if (!item || !user) {
            throw ParseError(line_no, "bad index in " + path.string());
        }
        links.push_back({*item, *user});
    }
    return LinkSet(std::move(links), n_items, n_users);
}

}  // namespace

LinkSet::LinkSet(std::vector<Link> links, std::size_t n_items, std::size_t n_users)
    : links_(std::move(links)), n_items_(n_items), n_users_(n_users) {
    std::sort(links_.begin(), links_.end());
    if (std::adjacent_find(links_.begin(), links_.end()) != links_.end()) {
        throw DataError("LinkSet: duplicate (item, user) pair");
    }
    for (const auto& l : links_) {
        if (l.item >= n_items_ || l.user >= n_users_) {
            throw DataError("LinkSet: index out of range");
        }
    }
}

bool LinkSet::contains(Link link) const {
    return std::binary_search(links_.begin(), links_.end(), link);
}

BipartiteGraph::BipartiteGraph(const LinkSet& links)
    : n_items_(links.n_items()),
      n_users_(links.n_users()),
      profile_offsets_(links.n_users() + 1, 0),
      profile_items_(links.size()),
      audience_offsets_(links.n_items() + 1, 0),
      audience_users_(links.size()) {
    for (const auto& l : links.links()) {
        ++profile_offsets_[l.user + 1];
        ++audience_offsets_[l.item + 1];
    }
    for (std::size_t u = 0; u < n_users_; ++u) {
        profile_offsets_[u + 1] += profile_offsets_[u];
    }
    for (std::size_t i = 0; i < n_items_; ++i) {
        audience_offsets_[i + 1] += audience_offsets_[i];
    }
    // Links arrive sorted by (item, user): both CSR lists come out sorted.
    std::vector<std::size_t> profile_fill(profile_offsets_.begin(), profile_offsets_.end() - 1);
    std::vector<std::size_t> audience_fill(audience_offsets_.begin(), audience_offsets_.end() - 1);
    for (const auto& l : links.links()) {
        profile_items_[profile_fill[l.user]++] = l.item;
        audience_users_[audience_fill[l.item]++] = l.user;
    }
}

std::span<const std::uint32_t> BipartiteGraph::profile(std::size_t user) const {
    const auto begin = profile_offsets_.at(user);
    return {profile_items_.data() + begin, profile_offsets_[user + 1] - begin};
}

std::span<const std::uint32_t> BipartiteGraph::audience(std::size_t item) const {
    const auto begin = audience_offsets_.at(item);
    return {audience_users_.data() + begin, audience_offsets_[item + 1] - begin};
}

bool BipartiteGraph::has_link(std::size_t item, std::size_t user) const {
    const auto items = profile(user);
    return std::binary_search(items.begin(), items.end(), static_cast<std::uint32_t>(item));
}

std::vector<InteractionRecord> parse_ratings(std::istream& source, char delimiter) {
    std::vector<InteractionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        std::string_view view = line;
        if (!view.empty() && view.back() == '\r') {
            view.remove_suffix(1);
        }
        if (trim(view).empty()) {
            continue;
        }
        const auto fields = split_fields(view, delimiter);
        if (fields.size() < 3 || fields.size() > 4) {
            throw ParseError(line_no, "expected 3 or 4 fields, found " + std::to_string(fields.size()));
        }
        InteractionRecord rec;
        rec.user = std::string(trim(fields[0]));
        rec.item = std::string(trim(fields[1]));
        if (rec.user.empty() || rec.item.empty()) {
            throw ParseError(line_no, "empty user or item identifier");
        }
        const auto rating = parse_number<double>(fields[2]);
        if (!rating || !std::isfinite(*rating)) {
            throw ParseError(line_no, "unparsable rating '" + std::string(fields[2]) + "'");
        }
        rec.rating = *rating;
        if (fields.size() == 4 && !trim(fields[3]).empty()) {
            const auto ts = parse_number<std::int64_t>(fields[3]);
            if (!ts) {
                throw ParseError(line_no, "unparsable timestamp '" + std::string(fields[3]) + "'");
            }
            rec.timestamp = *ts;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<InteractionRecord> load_ratings(const std::filesystem::path& path, char delimiter) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open ratings file " + path.string());
    }
    return parse_ratings(in, delimiter);
}

IndexedLinks binarize(std::span<const InteractionRecord> records, double threshold) {
    if (!std::isfinite(threshold)) {
        throw ConfigError("binarize: threshold must be finite");
    }
    // Position of the last occurrence of each (user, item) pair.
    std::map<std::pair<std::string_view, std::string_view>, std::size_t> last;
    for (std::size_t r = 0; r < records.size(); ++r) {
        last[{records[r].user, records[r].item}] = r;
    }

    IndexedLinks out;
    std::unordered_map<std::string_view, std::uint32_t> user_index;
    std::unordered_map<std::string_view, std::uint32_t> item_index;
    std::vector<Link> links;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (last.at({rec.user, rec.item}) != r || rec.rating < threshold) {
            continue;
        }
        auto [uit, new_user] = user_index.try_emplace(rec.user, static_cast<std::uint32_t>(user_index.size()));
        if (new_user) {
            out.index.user_ids.push_back(rec.user);
        }
        auto [iit, new_item] = item_index.try_emplace(rec.item, static_cast<std::uint32_t>(item_index.size()));
        if (new_item) {
            out.index.item_ids.push_back(rec.item);
        }
        links.push_back({iit->second, uit->second});
    }
    out.links = LinkSet(std::move(links), out.index.item_ids.size(), out.index.user_ids.size());
    return out;
}

DataSplit split_train_probe(const LinkSet& links, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("split ratio must lie in (0, 1)");
    }
    if (links.size() < 2) {
        throw DataError("cannot split fewer than 2 links");
    }
    const auto probe_count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(links.size())));
    const auto chosen = sample_without_replacement(links.size(), probe_count, seed);
    std::vector<bool> in_probe(links.size(), false);
    for (auto idx : chosen) {
        in_probe[idx] = true;
    }
    std::vector<Link> training;
    std::vector<Link> probe;
    training.reserve(links.size() - probe_count);
    probe.reserve(probe_count);
    const auto all = links.links();
    for (std::size_t k = 0; k < all.size(); ++k) {
        (in_probe[k] ? probe : training).push_back(all[k]);
    }
    return DataSplit{LinkSet(std::move(training), links.n_items(), links.n_users()),
                     LinkSet(std::move(probe), links.n_items(), links.n_users()), seed, ratio};
}

BipartiteGraph build_graph(const LinkSet& training) {
    if (training.empty()) {
        throw DataError("build_graph: training set is empty");
    }
    return BipartiteGraph(training);
}

double density(const LinkSet& links) {
    if (links.n_items() == 0 || links.n_users() == 0) {
        throw DataError("density: empty index space");
    }
    return static_cast<double>(links.size()) /
           (static_cast<double>(links.n_items()) * static_cast<double>(links.n_users()));
}

IndexedLinks subsample_to_density(const IndexedLinks& data, double target_density, std::uint64_t seed) {
    if (!(target_density > 0.0 && target_density <= 1.0)) {
        throw ConfigError("target density must lie in (0, 1]");
    }
    const auto all = data.links.links();
    const auto order = sample_without_replacement(all.size(), all.size(), seed);

    std::vector<std::uint32_t> item_seen(data.links.n_items());
    std::vector<std::uint32_t> user_seen(data.links.n_users());
    std::uint32_t stamp = 0;
    auto density_of_prefix = [&](std::size_t count) {
        ++stamp;
        std::size_t items = 0;
        std::size_t users = 0;
        for (std::size_t k = 0; k < count; ++k) {
            const auto& l = all[order[k]];
            if (item_seen[l.item] != stamp) {
                item_seen[l.item] = stamp;
                ++items;
            }
            if (user_seen[l.user] != stamp) {
                user_seen[l.user] = stamp;
                ++users;
            }
        }
        return static_cast<double>(count) / (static_cast<double>(items) * static_cast<double>(users));
    };

    // Smallest prefix reaching the target; density grows with the prefix
    // length apart from small fluctuations, which bisection tolerates.
    std::size_t lo = 1;
    std::size_t hi = all.size();
    if (all.empty() || density_of_prefix(hi) < target_density) {
        throw DataError("dataset is too sparse for the requested density");
    }
    while (lo < hi) {
        const auto mid = lo + (hi - lo) / 2;
        if (density_of_prefix(mid) >= target_density) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    std::vector<Link> kept;
    kept.reserve(lo);
    for (std::size_t k = 0; k < lo; ++k) {
        kept.push_back(all[order[k]]);
    }
    std::sort(kept.begin(), kept.end());
    return compact(kept, data.index, data.links.n_items(), data.links.n_users());
}

void write_split(const std::filesystem::path& dir, const DataSplit& split, const IndexMap& index) {
    std::filesystem::create_directories(dir);
    write_links(dir / "train.txt", split.training);
    write_links(dir / "probe.txt", split.probe);
    nlohmann::ordered_json meta;
    meta["seed"] = split.seed;
    meta["ratio"] = split.ratio;
    meta["n_items"] = split.training.n_items();
    meta["n_users"] = split.training.n_users();
    meta["training_links"] = split.training.size();
    meta["probe_links"] = split.probe.size();
    meta["user_ids"] = index.user_ids;
    meta["item_ids"] = index.item_ids;
    std::ofstream out(dir / "split.json");
    if (!out) {
        throw DataError("cannot write " + (dir / "split.json").string());
    }
    out << meta.dump(2) << '\n';
}

StoredSplit read_split(const std::filesystem::path& dir) {
    std::ifstream in(dir / "split.json");
    if (!in) {
        throw DataError("cannot read " + (dir / "split.json").string());
    }
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("split.json: ") + e.what());
    }
    StoredSplit stored;
    const auto n_items = meta.at("n_items").get<std::size_t>();
    const auto n_users = meta.at("n_users").get<std::size_t>();
    stored.split.seed = meta.at("seed").get<std::uint64_t>();
    stored.split.ratio = meta.at("ratio").get<double>();
    stored.split.training = read_links(dir / "train.txt", n_items, n_users);
    stored.split.probe = read_links(dir / "probe.txt", n_items, n_users);
    stored.index.user_ids = meta.at("user_ids").get<std::vector<std::string>>();
    stored.index.item_ids = meta.at("item_ids").get<std::vector<std::string>>();
    return stored;
}

}  // namespace ills
