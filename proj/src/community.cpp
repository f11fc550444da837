#include "ontorag/community.hpp"

#include "ontorag/errors.hpp"
#include "ontorag/util.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

namespace ontorag {

UndirectedGraph::UndirectedGraph(std::size_t node_count,
                                 std::span<const std::pair<std::size_t, std::size_t>> edges)
    : adjacency_(node_count) {
    for (auto [u, v] : edges) {
        if (u >= node_count || v >= node_count) {
            throw InvalidArgument("edge endpoint out of range");
        }
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        edges_.emplace_back(u, v);
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    for (auto [u, v] : edges_) {
        adjacency_[u].push_back(v);
        adjacency_[v].push_back(u);
    }
    for (auto& nb : adjacency_) std::sort(nb.begin(), nb.end());
}

bool UndirectedGraph::has_edge(std::size_t u, std::size_t v) const {
    const auto& nb = adjacency_[u];
    return std::binary_search(nb.begin(), nb.end(), v);
}

UndirectedGraph UndirectedGraph::induced(std::span<const std::size_t> nodes) const {
    std::map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = i;
    std::vector<std::pair<std::size_t, std::size_t>> sub;
    for (auto [u, v] : edges_) {
        auto a = local.find(u);
        auto b = local.find(v);
        if (a != local.end() && b != local.end()) sub.emplace_back(a->second, b->second);
    }
    return UndirectedGraph(nodes.size(), sub);
}

Partition Partition::singletons(std::size_t n) {
    Partition p;
    p.membership.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.membership[i] = i;
    p.community_count = n;
    return p;
}

Partition Partition::from_membership(std::vector<std::size_t> membership) {
    std::map<std::size_t, std::size_t> relabel;
    for (auto& c : membership) {
        auto [it, inserted] = relabel.try_emplace(c, relabel.size());
        c = it->second;
    }
    Partition p;
    p.membership = std::move(membership);
    p.community_count = relabel.size();
    return p;
}

std::vector<std::vector<std::size_t>> Partition::communities() const {
    std::vector<std::vector<std::size_t>> out(community_count);
    for (std::size_t v = 0; v < membership.size(); ++v) out[membership[v]].push_back(v);
    return out;
}

double modularity(const UndirectedGraph& graph, const Partition& partition, double resolution) {
    if (partition.membership.size() != graph.node_count()) {
        throw InvalidArgument("partition does not cover the graph");
    }
    const double m = static_cast<double>(graph.edge_count());
    if (m == 0.0) {
        throw ModularityError("modularity is undefined on a graph without edges");
    }
    // Sum over communities: L_c / m - gamma (K_c / 2m)^2.
    std::vector<double> internal(partition.community_count, 0.0);
    std::vector<double> degree_sum(partition.community_count, 0.0);
    for (auto [u, v] : graph.edges()) {
        if (partition.membership[u] == partition.membership[v]) {
            internal[partition.membership[u]] += 1.0;
        }
    }
    for (std::size_t v = 0; v < graph.node_count(); ++v) {
        degree_sum[partition.membership[v]] += static_cast<double>(graph.degree(v));
    }
    double q = 0.0;
    for (std::size_t c = 0; c < partition.community_count; ++c) {
        q += internal[c] / m - resolution * (degree_sum[c] / (2.0 * m)) * (degree_sum[c] / (2.0 * m));
    }
    return q;
}

namespace {

/// Weighted multigraph used between aggregation levels. Self-loop weight counts once
/// in `self_weight` and twice in the node's strength.
struct WeightedGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // no self entries
    std::vector<double> self_weight;
    std::vector<double> strength;
    double total_weight = 0.0;  // m

    std::size_t size() const { return adj.size(); }

    static WeightedGraph from(const UndirectedGraph& g) {
        WeightedGraph w;
        const std::size_t n = g.node_count();
        w.adj.resize(n);
        w.self_weight.assign(n, 0.0);
        w.strength.assign(n, 0.0);
        for (auto [u, v] : g.edges()) {
            w.adj[u].emplace_back(v, 1.0);
            w.adj[v].emplace_back(u, 1.0);
            w.strength[u] += 1.0;
            w.strength[v] += 1.0;
            w.total_weight += 1.0;
        }
        return w;
    }
};

constexpr double kTieEps = 1e-12;

class LeidenRun {
public:
    LeidenRun(double resolution, double theta, Rng& rng)
        : gamma_(resolution), theta_(theta), rng_(rng) {}

    /// One full Leiden pass starting from `initial` on the original graph.
    std::vector<std::size_t> pass(const WeightedGraph& base, std::vector<std::size_t> initial) {
        WeightedGraph graph = base;
        std::vector<std::size_t> membership = std::move(initial);
        // original node -> current aggregate node
        std::vector<std::size_t> node_of(base.size());
        for (std::size_t i = 0; i < node_of.size(); ++i) node_of[i] = i;

        for (;;) {
            move_nodes_fast(graph, membership);
            const std::size_t k = relabel(membership);
            if (k == graph.size()) break;

            std::vector<std::size_t> refined = refine(graph, membership);
            const std::size_t r = relabel(refined);

            // Aggregate on the refined partition; aggregate nodes inherit the
            // non-refined community of their members.
            std::vector<std::size_t> agg_membership(r);
            for (std::size_t v = 0; v < graph.size(); ++v) agg_membership[refined[v]] = membership[v];
            graph = aggregate(graph, refined, r);
            for (auto& a : node_of) a = refined[a];
            membership = std::move(agg_membership);
        }

        std::vector<std::size_t> flat(base.size());
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = membership[node_of[i]];
        return flat;
    }

private:
    static std::size_t relabel(std::vector<std::size_t>& membership) {
        std::map<std::size_t, std::size_t> ids;
        for (auto& c : membership) {
            auto [it, inserted] = ids.try_emplace(c, ids.size());
            c = it->second;
        }
        return ids.size();
    }

    void move_nodes_fast(const WeightedGraph& g, std::vector<std::size_t>& membership) {
        const std::size_t n = g.size();
        const double two_m = 2.0 * g.total_weight;
        // Community ids range over [0, n); unused ids form the pool of empty communities.
        relabel(membership);
        std::vector<double> community_strength(n, 0.0);
        std::vector<std::size_t> community_size(n, 0);
        for (std::size_t v = 0; v < n; ++v) {
            community_strength[membership[v]] += g.strength[v];
            community_size[membership[v]]++;
        }
        std::vector<std::size_t> empty;
        for (std::size_t c = n; c-- > 0;) {
            if (community_size[c] == 0) empty.push_back(c);
        }

        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        rng_.shuffle(order);
        std::deque<std::size_t> queue(order.begin(), order.end());
        std::vector<char> queued(n, 1);

        std::vector<double> link(n, 0.0);
        std::vector<std::size_t> touched;
        std::size_t plateau_moves = n;
        while (!queue.empty()) {
            const std::size_t v = queue.front();
            queue.pop_front();
            queued[v] = 0;
            const std::size_t old = membership[v];
            const double kv = g.strength[v];

            touched.clear();
            for (auto [u, w] : g.adj[v]) {
                const std::size_t c = membership[u];
                if (link[c] == 0.0) touched.push_back(c);
                link[c] += w;
            }

            community_strength[old] -= kv;
            community_size[old]--;
            if (community_size[old] == 0) empty.push_back(old);

            std::size_t best = old;
            double best_gain = link[old] - gamma_ * kv * community_strength[old] / two_m;
            std::size_t ties = 1;
            for (std::size_t c : touched) {
                if (c == old) continue;
                const double gain = link[c] - gamma_ * kv * community_strength[c] / two_m;
                if (gain > best_gain + kTieEps) {
                    best_gain = gain;
                    best = c;
                    ties = 1;
                } else if (gain >= best_gain - kTieEps && rng_.below(++ties) == 0) {
                    best = c;
                }
            }
            // Zero-gain moves let the search drift across plateaus; a budget keeps it finite.
            if (best != old && best_gain <= link[old] - gamma_ * kv * community_strength[old] / two_m + kTieEps) {
                if (plateau_moves == 0) {
                    best = old;
                } else {
                    --plateau_moves;
                }
            }
            if (best_gain < 0.0 && community_size[old] > 0) {
                best = empty.back();
            }
            if (community_size[best] == 0) {
                empty.erase(std::find(empty.begin(), empty.end(), best));
            }
            community_strength[best] += kv;
            community_size[best]++;
            membership[v] = best;

            for (std::size_t c : touched) link[c] = 0.0;

            if (best != old) {
                for (auto [u, w] : g.adj[v]) {
                    if (!queued[u] && membership[u] != best) {
                        queued[u] = 1;
                        queue.push_back(u);
                    }
                }
            }
        }
    }

    std::vector<std::size_t> refine(const WeightedGraph& g, const std::vector<std::size_t>& membership) {
        const std::size_t n = g.size();
        const double two_m = 2.0 * g.total_weight;
        std::vector<std::size_t> refined(n);
        for (std::size_t v = 0; v < n; ++v) refined[v] = v;
        std::vector<double> ref_strength = g.strength;
        std::vector<std::size_t> ref_size(n, 1);
        // Weight from a refined community to the rest of its parent community.
        std::vector<double> ref_external(n, 0.0);

        std::size_t k = 0;
        for (auto c : membership) k = std::max(k, c + 1);
        std::vector<std::vector<std::size_t>> members(k);
        std::vector<double> parent_strength(k, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            members[membership[v]].push_back(v);
            parent_strength[membership[v]] += g.strength[v];
        }
        for (std::size_t v = 0; v < n; ++v) {
            for (auto [u, w] : g.adj[v]) {
                if (membership[u] == membership[v]) ref_external[v] += w;
            }
        }

        std::vector<double> link(n, 0.0);
        std::vector<std::size_t> touched;
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<std::size_t> nodes = members[c];
            rng_.shuffle(nodes);
            const double ks = parent_strength[c];
            for (std::size_t v : nodes) {
                if (ref_size[refined[v]] != 1) continue;
                const double kv = g.strength[v];
                // Only well-connected nodes may move.
                if (ref_external[refined[v]] < gamma_ * kv * (ks - kv) / two_m) continue;

                touched.clear();
                for (auto [u, w] : g.adj[v]) {
                    if (membership[u] != c) continue;
                    const std::size_t d = refined[u];
                    if (d == refined[v]) continue;
                    if (link[d] == 0.0) touched.push_back(d);
                    link[d] += w;
                }

                std::vector<std::size_t> candidates;
                std::vector<double> gains;
                double max_gain = 0.0;
                for (std::size_t d : touched) {
                    const double kd = ref_strength[d];
                    if (ref_external[d] < gamma_ * kd * (ks - kd) / two_m) continue;
                    const double gain = link[d] - gamma_ * kv * kd / two_m;
                    if (gain >= 0.0) {
                        candidates.push_back(d);
                        gains.push_back(gain);
                        max_gain = std::max(max_gain, gain);
                    }
                }
                if (!candidates.empty()) {
                    // Staying alone is an option with zero gain.
                    std::vector<double> weight(candidates.size() + 1);
                    double total = 0.0;
                    for (std::size_t i = 0; i < candidates.size(); ++i) {
                        weight[i] = std::exp((gains[i] - max_gain) / theta_);
                        total += weight[i];
                    }
                    weight.back() = std::exp((0.0 - max_gain) / theta_);
                    total += weight.back();
                    double draw = rng_.uniform() * total;
                    std::size_t pick = candidates.size();
                    for (std::size_t i = 0; i < weight.size(); ++i) {
                        if (draw < weight[i]) {
                            pick = i;
                            break;
                        }
                        draw -= weight[i];
                    }
                    if (pick < candidates.size()) {
                        const std::size_t d = candidates[pick];
                        const std::size_t own = refined[v];
                        ref_external[d] = ref_external[d] + ref_external[own] - 2.0 * link[d];
                        ref_strength[d] += kv;
                        ref_size[d]++;
                        ref_strength[own] = 0.0;
                        ref_size[own] = 0;
                        ref_external[own] = 0.0;
                        refined[v] = d;
                    }
                }
                for (std::size_t d : touched) link[d] = 0.0;
            }
        }
        return refined;
    }

    static WeightedGraph aggregate(const WeightedGraph& g, const std::vector<std::size_t>& refined,
                                   std::size_t r) {
        WeightedGraph out;
        out.adj.resize(r);
        out.self_weight.assign(r, 0.0);
        out.strength.assign(r, 0.0);
        out.total_weight = g.total_weight;
        std::vector<std::map<std::size_t, double>> acc(r);
        for (std::size_t v = 0; v < g.size(); ++v) {
            const std::size_t a = refined[v];
            out.strength[a] += g.strength[v];
            out.self_weight[a] += g.self_weight[v];
            for (auto [u, w] : g.adj[v]) {
                const std::size_t b = refined[u];
                if (a == b) {
                    out.self_weight[a] += w / 2.0;  // each internal edge is seen from both ends
                } else {
                    acc[a][b] += w;
                }
            }
        }
        for (std::size_t a = 0; a < r; ++a) {
            for (auto [b, w] : acc[a]) out.adj[a].emplace_back(b, w);
        }
        return out;
    }

    double gamma_;
    double theta_;
    Rng& rng_;
};

double weighted_quality(const WeightedGraph& g, const std::vector<std::size_t>& membership,
                        double gamma) {
    std::map<std::size_t, double> internal;
    std::map<std::size_t, double> strength;
    for (std::size_t v = 0; v < g.size(); ++v) {
        internal[membership[v]] += g.self_weight[v];
        strength[membership[v]] += g.strength[v];
        for (auto [u, w] : g.adj[v]) {
            if (membership[u] == membership[v]) internal[membership[v]] += w / 2.0;
        }
    }
    const double m = g.total_weight;
    double q = 0.0;
    for (auto [c, s] : strength) {
        q += internal[c] / m - gamma * (s / (2.0 * m)) * (s / (2.0 * m));
    }
    return q;
}

}  // namespace

Partition leiden(const UndirectedGraph& graph, double resolution, std::uint64_t seed,
                 const LeidenOptions& options) {
    if (!(resolution > 0.0)) {
        throw InvalidArgument("resolution must be positive");
    }
    const std::size_t n = graph.node_count();
    if (graph.edge_count() == 0) {
        return Partition::singletons(n);
    }
    const WeightedGraph base = WeightedGraph::from(graph);

    std::vector<std::size_t> best;
    double best_quality = 0.0;
    for (std::size_t attempt = 0; attempt < std::max<std::size_t>(1, options.restarts); ++attempt) {
        std::uint64_t state = seed + attempt;
        Rng rng(splitmix64(state));
        LeidenRun run(resolution, options.theta, rng);

        std::vector<std::size_t> membership(n);
        for (std::size_t i = 0; i < n; ++i) membership[i] = i;
        double quality = weighted_quality(base, membership, resolution);
        for (std::size_t pass = 0; pass < std::max<std::size_t>(1, options.max_passes); ++pass) {
            auto next = run.pass(base, membership);
            const double q = weighted_quality(base, next, resolution);
            const bool same =
                Partition::from_membership(next) == Partition::from_membership(membership);
            if (q + 1e-12 < quality) break;  // never accept a worse pass
            membership = std::move(next);
            quality = q;
            if (same) break;
        }
        if (best.empty() || quality > best_quality + 1e-12) {
            best = std::move(membership);
            best_quality = quality;
        }
    }
    std::vector<std::size_t>& membership = best;
    return Partition::from_membership(std::move(membership));
}

}  // namespace ontorag
