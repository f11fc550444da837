#include <doctest.h>

#include "ontorag/community.hpp"
#include "ontorag/errors.hpp"

#include "../support/oracles.hpp"

#include <random>

using namespace ontorag;

namespace {

UndirectedGraph graph(std::size_t n, const std::vector<oracle::Edge>& edges) { return UndirectedGraph(n, edges); }

}  // namespace

TEST_CASE("graph construction collapses parallel edges and drops self-loops") {
    const UndirectedGraph g = graph(3, {{0, 1}, {1, 0}, {2, 2}, {1, 2}});
    CHECK(g.edge_count() == 2);
    CHECK(g.degree(1) == 2);
    CHECK(g.has_edge(1, 0));
    CHECK_FALSE(g.has_edge(2, 2));
    const std::vector<std::size_t> keep{1, 2};
    const UndirectedGraph sub = g.induced(keep);
    CHECK(sub.node_count() == 2);
    CHECK(sub.edge_count() == 1);
}

TEST_CASE("partition renumbers by first appearance") {
    const Partition p = Partition::from_membership({7, 3, 7, 9});
    CHECK(p.membership == std::vector<std::size_t>{0, 1, 0, 2});
    CHECK(p.community_count == 3);
    CHECK(p.communities() == std::vector<std::vector<std::size_t>>{{0, 2}, {1}, {3}});
    CHECK(Partition::singletons(3).community_count == 3);
}

TEST_CASE("modularity on two disjoint edges") {
    const UndirectedGraph g = graph(4, {{0, 1}, {2, 3}});
    CHECK(modularity(g, Partition::from_membership({0, 0, 1, 1})) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(modularity(g, Partition::singletons(4)) == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(modularity(g, Partition::from_membership({0, 0, 0, 0})) == doctest::Approx(0.0));
    CHECK_THROWS_AS(modularity(graph(3, {}), Partition::singletons(3)), ModularityError);
}

TEST_CASE("modularity matches the dense oracle") {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + oracle::below(gen, 11);
        auto edges = oracle::random_graph(gen, n, 0.2 + 0.6 * oracle::unit(gen));
        if (edges.empty()) edges.emplace_back(0, 1);
        std::vector<std::size_t> membership;
        for (std::size_t i = 0; i < n; ++i) membership.push_back(oracle::below(gen, 4));
        const double gamma = 0.5 + oracle::unit(gen);
        const double expected = oracle::dense_modularity(n, edges, membership, gamma);
        CHECK(std::abs(modularity(graph(n, edges), Partition::from_membership(membership), gamma) - expected) < 1e-9);
    }
}

TEST_CASE("leiden splits bridged cliques") {
    const auto edges = oracle::bridged_cliques();
    const Partition p = leiden(graph(8, edges));
    CHECK(p.membership == std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1});
    CHECK(modularity(graph(8, edges), p) ==
          doctest::Approx(oracle::exhaustive_max_modularity(8, edges)).epsilon(1e-12));
}

TEST_CASE("leiden on tiny graphs") {
    CHECK(leiden(graph(3, {{0, 1}, {1, 2}, {0, 2}})).community_count == 1);
    CHECK(leiden(graph(3, {})) == Partition::singletons(3));
    CHECK(leiden(UndirectedGraph{}).membership.empty());
}

TEST_CASE("leiden is seeded and its communities are connected") {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 4 + oracle::below(gen, 30);
        const auto edges = oracle::random_graph(gen, n, 0.15);
        const UndirectedGraph g = graph(n, edges);
        const Partition a = leiden(g, 1.0, 5);
        CHECK(a == leiden(g, 1.0, 5));
        for (const auto& community : a.communities()) {
            const UndirectedGraph sub = g.induced(community);
            std::vector<oracle::Edge> sub_edges(sub.edges().begin(), sub.edges().end());
            CHECK(oracle::is_connected(community.size(), sub_edges));
        }
    }
}

TEST_CASE("higher resolution never yields fewer communities on a ring of cliques") {
    std::vector<oracle::Edge> edges;
    for (std::size_t c = 0; c < 6; ++c) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = i + 1; j < 3; ++j) edges.emplace_back(3 * c + i, 3 * c + j);
        }
        edges.emplace_back(3 * c + 2, (3 * c + 3) % 18);
    }
    const UndirectedGraph g = graph(18, edges);
    CHECK(leiden(g, 1.0).community_count == 6);
    CHECK(leiden(g, 0.05).community_count < 6);
}
