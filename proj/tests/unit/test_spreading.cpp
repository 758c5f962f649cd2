#include <doctest.h>

#include <cmath>
#include <random>

#include "ills/spreading.hpp"
#include "test_support.hpp"

using namespace ills;

TEST_CASE("spread_user on the toy graph") {
    const auto graph = build_graph(testing::toy_links());
    const auto f = spread_user(graph, 0);
    REQUIRE(f.size() == 3);
    CHECK(f[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(f[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f[2] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(f[0] + f[1] + f[2] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("densify tags and pins") {
    const auto graph = build_graph(testing::toy_links());
    const auto s = densify(graph);
    CHECK(s.value(0, 0) == 1.0);
    CHECK(s.value(1, 0) == 1.0);
    CHECK(s.provenance(0, 0) == Provenance::Observed);
    CHECK(s.value(2, 0) == doctest::Approx(0.25));
    CHECK(s.provenance(2, 0) == Provenance::Spread);
    REQUIRE(s.spread_mass().size() == 2);
    CHECK(s.spread_mass()[0] == doctest::Approx(2.0));
}

TEST_CASE("unreachable items stay at zero and are tagged Missing") {
    // Two disconnected components: u0-{i0,i1}, u1-{i2}.
    const auto graph = build_graph(LinkSet({{0, 0}, {1, 0}, {2, 1}}, 3, 2));
    const auto s = densify(graph);
    CHECK(s.value(2, 0) == 0.0);
    CHECK(s.provenance(2, 0) == Provenance::Missing);
    CHECK(s.value(0, 1) == 0.0);
    CHECK(s.provenance(0, 1) == Provenance::Missing);
}

TEST_CASE("single link graph") {
    const auto graph = build_graph(LinkSet({{0, 0}}, 1, 1));
    const auto f = spread_user(graph, 0);
    CHECK(f[0] == 1.0);
}

TEST_CASE("spreading conserves mass and matches the transfer-matrix oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<std::size_t> size(2, 25);
    std::uniform_real_distribution<double> prob(0.05, 0.6);
    for (int trial = 0; trial < 200; ++trial) {
        const auto links = testing::random_links(gen, size(gen), size(gen), prob(gen));
        const auto graph = build_graph(links);
        const Eigen::MatrixXd a = testing::dense_adjacency(links);
        const Eigen::MatrixXd w = testing::transfer_matrix(a);
        for (std::size_t u = 0; u < graph.n_users(); ++u) {
            const auto f = spread_user(graph, u);
            const Eigen::VectorXd expected = w * a.col(static_cast<Eigen::Index>(u));
            double total = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) {
                CHECK(f[i] >= 0.0);
                CHECK(std::abs(f[i] - expected(static_cast<Eigen::Index>(i))) <= 1e-12);
                total += f[i];
            }
            CHECK(std::abs(total - static_cast<double>(graph.user_degree(u))) <= 1e-10);
        }
    }
}

TEST_CASE("binary_scores holds only the adjacency") {
    const auto graph = build_graph(testing::toy_links());
    const auto s = binary_scores(graph);
    CHECK(s.count(Provenance::Observed) == 4);
    CHECK(s.count(Provenance::Missing) == 2);
    CHECK(s.value(2, 0) == 0.0);
}

TEST_CASE("spread_stats") {
    const auto graph = build_graph(testing::toy_links());
    const auto stats = spread_stats(densify(graph));
    CHECK(stats.nonzero_fraction == 1.0);
    REQUIRE(stats.per_user_mass.size() == 2);
    CHECK(stats.per_user_mass[1] == doctest::Approx(2.0));
}

TEST_CASE("score dump round-trips") {
    std::mt19937_64 gen(8);
    const auto graph = build_graph(testing::random_links(gen, 9, 7, 0.3));
    const auto s = densify(graph);
    const auto dir = std::filesystem::temp_directory_path();
    write_score_dump(dir / "ills_scores.bin", dir / "ills_prov.bin", s);
    const auto back = read_score_dump(dir / "ills_scores.bin", dir / "ills_prov.bin");
    CHECK(back == s);
    CHECK(std::filesystem::file_size(dir / "ills_scores.bin") == 16 + 8 * 9 * 7);
    CHECK(std::filesystem::file_size(dir / "ills_prov.bin") == 16 + 9 * 7);
}
