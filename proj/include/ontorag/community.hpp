#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ontorag {

/// Simple undirected, unweighted graph: parallel edges collapsed, self-loops dropped.
class UndirectedGraph {
public:
    UndirectedGraph() = default;
    UndirectedGraph(std::size_t node_count, std::span<const std::pair<std::size_t, std::size_t>> edges);

    std::size_t node_count() const { return adjacency_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    std::size_t degree(std::size_t v) const { return adjacency_[v].size(); }
    const std::vector<std::size_t>& neighbors(std::size_t v) const { return adjacency_[v]; }
    /// Edges as (u, v) with u < v, sorted.
    const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
    bool has_edge(std::size_t u, std::size_t v) const;

    /// Subgraph on `nodes`; node i of the result is nodes[i].
    UndirectedGraph induced(std::span<const std::size_t> nodes) const;

private:
    std::vector<std::vector<std::size_t>> adjacency_;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

/// Community assignment for every node, ids renumbered 0..k-1 by first appearance.
struct Partition {
    std::vector<std::size_t> membership;
    std::size_t community_count = 0;

    static Partition singletons(std::size_t n);
    static Partition from_membership(std::vector<std::size_t> membership);

    std::vector<std::vector<std::size_t>> communities() const;
    friend bool operator==(const Partition&, const Partition&) = default;
};

/// Newman modularity of `partition`, (1/2m) sum_ij (A_ij - gamma k_i k_j / 2m) delta(c_i, c_j).
/// Throws ModularityError when the graph has no edges.
double modularity(const UndirectedGraph& graph, const Partition& partition, double resolution = 1.0);

struct LeidenOptions {
    /// Randomness of the refinement step; small values approach greedy merging.
    double theta = 0.01;
    /// Full Leiden passes; each pass starts from the previous partition. Stops early once
    /// a pass leaves the partition unchanged.
    std::size_t max_passes = 32;
    /// Independent runs with seeds derived from the caller's seed; the highest-modularity
    /// result wins, earliest run on ties.
    std::size_t restarts = 32;
};

/// Leiden community detection maximizing modularity: fast local moving, refinement into
/// well-connected sub-communities, aggregation on the refined partition, repeated until
/// no node moves. Deterministic for a given seed.
Partition leiden(const UndirectedGraph& graph, double resolution = 1.0, std::uint64_t seed = 42,
                 const LeidenOptions& options = {});

}  // namespace ontorag
