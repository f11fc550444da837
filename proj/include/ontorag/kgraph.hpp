#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ontorag/extract.hpp"

namespace ontorag {

struct Thresholds {
    double theta_name = 0.85;
    double theta_def = 0.80;
};

/// A cluster of key elements; a node of the knowledge graph.
struct CandidateClass {
    std::string id;
    std::set<std::string> member_ids;
    PropertySet properties;
    Embedding name_centroid;
    Embedding def_centroid;

    // Unnormalized member sums, kept so centroids can absorb later batches.
    Embedding name_sum;
    Embedding def_sum;
};

struct KgEdge {
    std::string source;
    std::string target;
    std::string label;

    friend auto operator<=>(const KgEdge&, const KgEdge&) = default;
};

struct KnowledgeGraph {
    std::vector<CandidateClass> classes;
    std::set<KgEdge> edges;

    const CandidateClass* find(const std::string& id) const;
    /// Messages for dangling edge endpoints and overlapping memberships.
    std::vector<std::string> integrity_errors() const;
};

/// Threshold test on name and definition cosines: 1 if both clear their thresholds.
int sim(const KeyElement& a, const KeyElement& b, const Thresholds& t);

/// Union-find over all similar pairs inside the batch, then each batch cluster joins the
/// pre-existing class whose centroids pass the threshold test (best name cosine wins)
/// or founds a new class. Returns the updated class list.
std::vector<CandidateClass> cluster_batch(std::span<const KeyElement> batch,
                                          std::vector<CandidateClass> existing,
                                          const Thresholds& t);

/// Union of member properties, each member's name and definition included.
PropertySet union_properties(const CandidateClass& cls,
                             const std::map<std::string, const KeyElement*>& store);

/// Lifts chunk-graph relationships onto classes. Self-loops are kept; duplicates collapse.
std::set<KgEdge> project_edges(std::span<const ChunkGraph> graphs, const CanonicalMap& canon,
                               std::span<const CandidateClass> classes);

struct GraphBuildConfig {
    Thresholds thresholds;
    std::size_t batch_size = 256;
};

KnowledgeGraph build_knowledge_graph(std::span<const KeyElement> key_elements,
                                     std::span<const ChunkGraph> graphs, const CanonicalMap& canon,
                                     const GraphBuildConfig& config);

json to_json(const KnowledgeGraph& kg);
KnowledgeGraph knowledge_graph_from_json(const json& j);

}  // namespace ontorag
