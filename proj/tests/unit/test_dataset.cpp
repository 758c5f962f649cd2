#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ills/dataset.hpp"
#include "ills/errors.hpp"
#include "ills/rng.hpp"
#include "test_support.hpp"

using namespace ills;

TEST_CASE("parse_ratings maps fields in file order") {
    std::istringstream in("1\t50\t5\t881250949\n\n2\t7\t3.5\n");
    const auto recs = parse_ratings(in);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].user == "1");
    CHECK(recs[0].item == "50");
    CHECK(recs[0].rating == 5.0);
    CHECK(recs[0].timestamp == 881250949);
    CHECK(recs[1].rating == 3.5);
    CHECK_FALSE(recs[1].timestamp.has_value());
}

TEST_CASE("parse_ratings on an empty stream") {
    std::istringstream in("");
    CHECK(parse_ratings(in).empty());
}

TEST_CASE("parse_ratings reports the failing line") {
    SUBCASE("too few fields") {
        std::istringstream in("1\t50");
        try {
            parse_ratings(in);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 1);
        }
    }
    SUBCASE("bad rating on line 3") {
        std::istringstream in("1\t2\t3\n\n1\t3\tfive\n");
        try {
            parse_ratings(in);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("non-finite rating") {
        std::istringstream in("1\t2\tnan\n");
        CHECK_THROWS_AS(parse_ratings(in), ParseError);
    }
}

TEST_CASE("parse_ratings honours a custom delimiter and CRLF") {
    std::istringstream in("u1,i1,4\r\nu2,i1,2\r\n");
    const auto recs = parse_ratings(in, ',');
    REQUIRE(recs.size() == 2);
    CHECK(recs[1].user == "u2");
    CHECK(recs[1].rating == 2.0);
}

TEST_CASE("binarize applies the threshold") {
    const std::vector<InteractionRecord> recs{{"a", "x", 3}, {"a", "y", 4}, {"b", "x", 5}, {"b", "z", 2}};
    const auto out = binarize(recs, 3.0);
    CHECK(out.links.size() == 3);
    CHECK(out.index.user_ids == std::vector<std::string>{"a", "b"});
    CHECK(out.index.item_ids == std::vector<std::string>{"x", "y"});  // z never survives

    const std::vector<InteractionRecord> ten_point{{"a", "x", 6}, {"a", "y", 7}};
    CHECK(binarize(ten_point, 6.0).links.size() == 2);
    const std::vector<InteractionRecord> low{{"a", "x", 2}};
    CHECK(binarize(low, 3.0).links.empty());
}

TEST_CASE("binarize keeps the last occurrence of a repeated pair") {
    const std::vector<InteractionRecord> recs{{"a", "x", 5}, {"b", "y", 4}, {"a", "x", 1}};
    const auto out = binarize(recs, 3.0);
    REQUIRE(out.links.size() == 1);
    CHECK(out.index.user_ids == std::vector<std::string>{"b"});

    const std::vector<InteractionRecord> upgraded{{"a", "x", 1}, {"a", "x", 5}};
    CHECK(binarize(upgraded, 3.0).links.size() == 1);
}

TEST_CASE("binarize is monotone in the threshold") {
    std::mt19937_64 gen(11);
    std::uniform_int_distribution<int> pick(0, 9);
    std::uniform_int_distribution<int> stars(1, 5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<InteractionRecord> recs;
        for (int r = 0; r < 40; ++r) {
            recs.push_back({std::to_string(pick(gen)), std::to_string(pick(gen)), static_cast<double>(stars(gen))});
        }
        std::size_t previous = binarize(recs, 0.0).links.size();
        for (double t = 1.0; t <= 6.0; t += 0.5) {
            const auto now = binarize(recs, t).links.size();
            CHECK(now <= previous);
            previous = now;
        }
    }
}

TEST_CASE("split_train_probe sizes and determinism") {
    std::vector<Link> ten;
    for (std::uint32_t i = 0; i < 10; ++i) {
        ten.push_back({i, i % 3});
    }
    const LinkSet links(ten, 10, 3);
    const auto split = split_train_probe(links, 0.1, 42);
    CHECK(split.probe.size() == 1);
    CHECK(split.training.size() == 9);
    CHECK(split == split_train_probe(links, 0.1, 42));

    std::vector<Link> many;
    for (std::uint32_t i = 0; i < 1000; ++i) {
        for (std::uint32_t u = 0; u < 100; ++u) {
            many.push_back({i, u});
        }
    }
    const auto big = split_train_probe(LinkSet(many, 1000, 100), 0.1, 7);
    CHECK(big.probe.size() == 10000);
}

TEST_CASE("split_train_probe rejects bad input") {
    const auto links = testing::toy_links();
    CHECK_THROWS_AS(split_train_probe(links, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_train_probe(links, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(split_train_probe(LinkSet({{0, 0}}, 1, 1), 0.5, 1), DataError);
}

TEST_CASE("split partitions the link set for every seed") {
    std::mt19937_64 gen(3);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto links = testing::random_links(gen, 12, 9, 0.3);
        if (links.size() < 2) {
            continue;
        }
        const auto split = split_train_probe(links, 0.25, seed);
        std::set<Link> seen;
        for (const auto& l : split.training.links()) {
            seen.insert(l);
        }
        for (const auto& l : split.probe.links()) {
            CHECK_FALSE(split.training.contains(l));
            seen.insert(l);
        }
        CHECK(seen.size() == links.size());
        CHECK(split.training.size() + split.probe.size() == links.size());
        for (const auto& l : links.links()) {
            CHECK(seen.count(l) == 1);
        }
    }
}

TEST_CASE("build_graph degrees on the toy graph") {
    const auto graph = build_graph(testing::toy_links());
    CHECK(graph.user_degree(0) == 2);
    CHECK(graph.user_degree(1) == 2);
    CHECK(graph.item_degree(0) == 1);
    CHECK(graph.item_degree(1) == 2);
    CHECK(graph.item_degree(2) == 1);
    CHECK(graph.has_link(2, 1));
    CHECK_FALSE(graph.has_link(2, 0));

    const auto single = build_graph(LinkSet({{0, 0}}, 1, 1));
    CHECK(single.user_degree(0) == 1);
    CHECK(single.item_degree(0) == 1);
    CHECK_THROWS_AS(build_graph(LinkSet({}, 2, 2)), DataError);
}

TEST_CASE("degree sums equal the link count") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto links = testing::random_links(gen, 15, 11, 0.2);
        const auto graph = build_graph(links);
        std::size_t users = 0;
        std::size_t items = 0;
        for (std::size_t u = 0; u < graph.n_users(); ++u) users += graph.user_degree(u);
        for (std::size_t i = 0; i < graph.n_items(); ++i) items += graph.item_degree(i);
        CHECK(users == links.size());
        CHECK(items == links.size());
    }
}

TEST_CASE("density") {
    std::vector<Link> complete;
    for (std::uint32_t i = 0; i < 4; ++i) {
        for (std::uint32_t u = 0; u < 5; ++u) {
            complete.push_back({i, u});
        }
    }
    CHECK(density(LinkSet(complete, 4, 5)) == 1.0);
    CHECK(density(LinkSet({{0, 0}, {1, 0}, {1, 1}, {2, 1}}, 3, 2)) == doctest::Approx(4.0 / 6.0));
    CHECK(100000.0 / (943.0 * 1682.0) == doctest::Approx(0.0630).epsilon(0.001));
}

TEST_CASE("subsample_to_density reaches the target after compaction") {
    std::mt19937_64 gen(9);
    const auto links = testing::random_links(gen, 200, 150, 0.08);
    IndexedLinks data{links, {}};
    for (std::size_t i = 0; i < links.n_items(); ++i) data.index.item_ids.push_back("i" + std::to_string(i));
    for (std::size_t u = 0; u < links.n_users(); ++u) data.index.user_ids.push_back("u" + std::to_string(u));

    const auto sub = subsample_to_density(data, 0.02, 1);
    CHECK(density(sub.links) >= 0.02);
    CHECK(density(sub.links) < 0.021);
    CHECK(sub.index.item_ids.size() == sub.links.n_items());
    const auto graph = build_graph(sub.links);
    for (std::size_t u = 0; u < graph.n_users(); ++u) CHECK(graph.user_degree(u) > 0);
    for (std::size_t i = 0; i < graph.n_items(); ++i) CHECK(graph.item_degree(i) > 0);
    CHECK(subsample_to_density(data, 0.02, 1).links == sub.links);
}

TEST_CASE("split files round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "ills_split_roundtrip";
    std::filesystem::remove_all(dir);
    std::mt19937_64 gen(1);
    const auto links = testing::random_links(gen, 10, 8, 0.4);
    const auto split = split_train_probe(links, 0.2, 99);
    IndexMap index;
    for (std::size_t i = 0; i < 10; ++i) index.item_ids.push_back("item" + std::to_string(i));
    for (std::size_t u = 0; u < 8; ++u) index.user_ids.push_back("user" + std::to_string(u));
    write_split(dir, split, index);
    const auto stored = read_split(dir);
    CHECK(stored.split == split);
    CHECK(stored.index == index);
    std::filesystem::remove_all(dir);
}

TEST_CASE("seeded sampling is deterministic and distinct") {
    const auto a = sample_without_replacement(1000, 100, 5);
    CHECK(a == sample_without_replacement(1000, 100, 5));
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 100);
    CHECK(derive_seed(1, Stream::Split) != derive_seed(1, Stream::Mask));
    // Reference draw pinned so a change of generator is noticed.
    std::mt19937_64 gen;  // default seed 5489, first draw 14514284786278117030
    CHECK(uniform_below(gen, 10) == 0);
    CHECK(uniform_below(gen, 1) == 0);
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
}
