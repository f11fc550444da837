#pragma once

// Brute-force reference implementations used as oracles. They share no code with the
// library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Edge = std::pair<std::size_t, std::size_t>;

/// Modularity from the dense adjacency matrix, term by term.
inline double dense_modularity(std::size_t n, const std::vector<Edge>& edges,
                               const std::vector<std::size_t>& membership, double gamma = 1.0) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (auto [u, v] : edges) {
        if (u == v) continue;
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    std::vector<double> k(n, 0.0);
    double two_m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) k[i] += a[i][j];
        two_m += k[i];
    }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (membership[i] == membership[j]) q += a[i][j] - gamma * k[i] * k[j] / two_m;
        }
    }
    return q / two_m;
}

/// Calls fn with every set partition of {0..n-1} as a restricted growth string.
inline void for_each_partition(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& fn) {
    std::vector<std::size_t> rgs(n, 0);
    std::vector<std::size_t> max_prefix(n, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == n) {
            fn(rgs);
            return;
        }
        const std::size_t limit = i == 0 ? 0 : max_prefix[i - 1] + 1;
        for (std::size_t c = 0; c <= limit; ++c) {
            rgs[i] = c;
            max_prefix[i] = i == 0 ? c : std::max(max_prefix[i - 1], c);
            rec(i + 1);
        }
    };
    if (n == 0) {
        fn(rgs);
        return;
    }
    rec(0);
}

/// Highest modularity over all partitions.
inline double exhaustive_max_modularity(std::size_t n, const std::vector<Edge>& edges, double gamma = 1.0) {
    double best = -std::numeric_limits<double>::infinity();
    for_each_partition(n, [&](const std::vector<std::size_t>& p) {
        best = std::max(best, dense_modularity(n, edges, p, gamma));
    });
    return best;
}

/// Connected components by repeated flood fill over a pairwise predicate.
inline std::set<std::set<std::size_t>> components(std::size_t n,
                                                  const std::function<bool(std::size_t, std::size_t)>& linked) {
    std::vector<int> seen(n, 0);
    std::set<std::set<std::size_t>> out;
    for (std::size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::set<std::size_t> comp{s};
        std::vector<std::size_t> stack{s};
        seen[s] = 1;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v = 0; v < n; ++v) {
                if (!seen[v] && (linked(u, v) || linked(v, u))) {
                    seen[v] = 1;
                    comp.insert(v);
                    stack.push_back(v);
                }
            }
        }
        out.insert(comp);
    }
    return out;
}

inline bool is_connected(std::size_t n, const std::vector<Edge>& edges) {
    std::set<Edge> e(edges.begin(), edges.end());
    auto comps = components(n, [&](std::size_t u, std::size_t v) { return e.count({u, v}) > 0; });
    return comps.size() == 1;
}

inline double plain_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

/// Full-table LCS length.
inline std::size_t lcs_table(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
        }
    }
    return t[a.size()][b.size()];
}

inline std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

/// ROUGE-L distance for lowercase, punctuation-free, space-separated strings.
inline double rouge_l_distance(const std::string& a, const std::string& b) {
    const auto wa = words(a), wb = words(b);
    if (wa.empty() && wb.empty()) return 0.0;
    if (wa.empty() || wb.empty()) return 1.0;
    const double l = static_cast<double>(lcs_table(wa, wb));
    if (l == 0.0) return 1.0;
    const double r = l / static_cast<double>(wa.size());
    const double p = l / static_cast<double>(wb.size());
    return 1.0 - 2.0 * p * r / (p + r);
}

/// Average linkage recomputed from scratch at every step over cluster member lists.
/// Ties go to the pair whose smallest labels are lexicographically smallest.
inline std::vector<std::vector<std::size_t>> average_linkage(const std::vector<std::vector<double>>& d,
                                                             const std::vector<std::string>& labels,
                                                             double threshold) {
    std::vector<std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < d.size(); ++i) clusters.push_back({i});
    auto smallest = [&](const std::vector<std::size_t>& c) {
        std::pair<std::string, std::size_t> best{labels[c[0]], c[0]};
        for (auto x : c) best = std::min(best, std::pair<std::string, std::size_t>{labels[x], x});
        return best;
    };
    for (;;) {
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::pair<std::string, std::size_t>, std::pair<std::string, std::size_t>> best_key;
        std::size_t bi = 0, bj = 0;
        bool found = false;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                double total = 0.0;
                for (auto x : clusters[i]) {
                    for (auto y : clusters[j]) total += d[x][y];
                }
                const double avg = total / static_cast<double>(clusters[i].size() * clusters[j].size());
                auto a = smallest(clusters[i]), b = smallest(clusters[j]);
                if (b < a) std::swap(a, b);
                const auto key = std::pair{a, b};
                if (!found || avg < best || (avg == best && key < best_key)) {
                    best = avg;
                    best_key = key;
                    bi = i;
                    bj = j;
                    found = true;
                }
            }
        }
        if (!found || best > threshold) break;
        clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
        clusters.erase(clusters.begin() + static_cast<long>(bj));
    }
    for (auto& c : clusters) std::sort(c.begin(), c.end());
    std::sort(clusters.begin(), clusters.end());
    return clusters;
}

/// Uniform in [0, 1) from the raw engine output, which the standard fixes bit for bit
/// (std distributions are implementation-defined).
inline double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline std::size_t below(std::mt19937_64& gen, std::size_t bound) {
    return static_cast<std::size_t>(unit(gen) * static_cast<double>(bound));
}

/// Erdos-Renyi graph; edges (u, v) with u < v.
inline std::vector<Edge> random_graph(std::mt19937_64& gen, std::size_t n, double p) {
    std::vector<Edge> edges;
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = u + 1; v < n; ++v) {
            if (unit(gen) < p) edges.emplace_back(u, v);
        }
    }
    return edges;
}

/// Two 4-cliques {0..3} and {4..7} joined by the edge 3-4.
inline std::vector<Edge> bridged_cliques() {
    std::vector<Edge> e;
    for (std::size_t base : {0u, 4u}) {
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = i + 1; j < 4; ++j) e.emplace_back(base + i, base + j);
        }
    }
    e.emplace_back(3, 4);
    return e;
}

}  // namespace oracle
