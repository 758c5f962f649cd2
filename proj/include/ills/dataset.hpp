#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ills {

struct InteractionRecord {
    std::string user;
    std::string item;
    double rating = 0.0;
    std::optional<std::int64_t> timestamp;
};

// One (item, user) collection event over dense 0-based indices.
struct Link {
    std::uint32_t item = 0;
    std::uint32_t user = 0;

    friend auto operator<=>(const Link&, const Link&) = default;
};

// Canonical set of links: sorted by (item, user), no duplicates, all indices
// inside [0, n_items) x [0, n_users).
class LinkSet {
public:
    LinkSet() = default;
    LinkSet(std::vector<Link> links, std::size_t n_items, std::size_t n_users);

    std::span<const Link> links() const noexcept { return links_; }
    std::size_t size() const noexcept { return links_.size(); }
    bool empty() const noexcept { return links_.empty(); }
    std::size_t n_items() const noexcept { return n_items_; }
    std::size_t n_users() const noexcept { return n_users_; }
    bool contains(Link link) const;

    friend bool operator==(const LinkSet&, const LinkSet&) = default;

private:
    std::vector<Link> links_;
    std::size_t n_items_ = 0;
    std::size_t n_users_ = 0;
};

// Raw identifiers behind each dense index.
struct IndexMap {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;

    friend bool operator==(const IndexMap&, const IndexMap&) = default;
};

struct IndexedLinks {
    LinkSet links;
    IndexMap index;
};

struct DataSplit {
    LinkSet training;
    LinkSet probe;
    std::uint64_t seed = 0;
    double ratio = 0.0;

    friend bool operator==(const DataSplit&, const DataSplit&) = default;
};

// Binary user-item adjacency kept twice in CSR form: user profiles (items per
// user) and item audiences (users per item). Both lists are sorted.
class BipartiteGraph {
public:
    explicit BipartiteGraph(const LinkSet& links);

    std::size_t n_items() const noexcept { return n_items_; }
    std::size_t n_users() const noexcept { return n_users_; }
    std::size_t link_count() const noexcept { return profile_items_.size(); }

    std::span<const std::uint32_t> profile(std::size_t user) const;
    std::span<const std::uint32_t> audience(std::size_t item) const;
    std::size_t user_degree(std::size_t user) const { return profile(user).size(); }
    std::size_t item_degree(std::size_t item) const { return audience(item).size(); }
    bool has_link(std::size_t item, std::size_t user) const;

private:
    std::size_t n_items_ = 0;
    std::size_t n_users_ = 0;
    std::vector<std::size_t> profile_offsets_;
    std::vector<std::uint32_t> profile_items_;
    std::vector<std::size_t> audience_offsets_;
    std::vector<std::uint32_t> audience_users_;
};

// Lines are `user<delim>item<delim>rating[<delim>timestamp]`; blank lines are
// skipped. Throws ParseError carrying the 1-based line number.
std::vector<InteractionRecord> parse_ratings(std::istream& source, char delimiter = '\t');
std::vector<InteractionRecord> load_ratings(const std::filesystem::path& path, char delimiter = '\t');

// A link exists iff rating >= threshold. The last occurrence of a repeated
// (user, item) pair wins. Indices follow first appearance among surviving
// links, so users and items without links never receive an index.
IndexedLinks binarize(std::span<const InteractionRecord> records, double threshold);

DataSplit split_train_probe(const LinkSet& links, double ratio, std::uint64_t seed);

BipartiteGraph build_graph(const LinkSet& training);

double density(const LinkSet& links);

// Uniform seeded link subsample whose density, measured after users and items
// left without links are dropped, is the smallest value >= target_density
// reachable by growing the sample. Survivors keep their relative index order.
IndexedLinks subsample_to_density(const IndexedLinks& data, double target_density, std::uint64_t seed);

// Split persistence: train.txt / probe.txt hold one "item user" pair per line,
// split.json carries seed, ratio, dimensions and the index maps.
void write_split(const std::filesystem::path& dir, const DataSplit& split, const IndexMap& index);

struct StoredSplit {
    DataSplit split;
    IndexMap index;
};
StoredSplit read_split(const std::filesystem::path& dir);

}  // namespace ills
