#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ontorag/community.hpp"
#include "ontorag/kgraph.hpp"

namespace ontorag {

struct OntologyClass {
    std::string id;
    int level = 0;
    /// Candidate-class ids covered by this class. A child's members are a subset of its parent's.
    std::set<std::string> members;
    std::string parent;  ///< empty at level 0
    PropertySet aggregated_properties;
    std::vector<std::string> synthesized_properties;
    std::string name;
    std::string definition;
    Embedding name_embedding;
    Embedding def_embedding;
    /// Chunks that mention any key element of any member class.
    std::set<std::string> source_chunk_ids;
    std::vector<std::string> warnings;
};

struct OntologyRelationship {
    std::string source;
    std::string target;
    std::set<std::string> labels;
    bool directed = true;

    friend auto operator<=>(const OntologyRelationship&, const OntologyRelationship&) = default;
};

/// IS-A from child to parent; HAS-A is the implied inverse.
struct HierarchyEdge {
    std::string parent;
    std::string child;

    friend auto operator<=>(const HierarchyEdge&, const HierarchyEdge&) = default;
};

struct OntologyLevel {
    int level = 0;
    double resolution = 1.0;
    /// Modularity of this level's partition on the whole class graph; empty without edges.
    std::optional<double> modularity;
    std::vector<OntologyClass> classes;
    std::vector<OntologyRelationship> relationships;
};

struct OntologyConfig {
    std::size_t max_depth = 3;
    /// Resolution per level; the last entry repeats for deeper levels.
    std::vector<double> resolutions{1.0};
    std::uint64_t seed = 42;
    LeidenOptions leiden;
    std::size_t threads = 0;

    double resolution_at(std::size_t level) const;
    void validate() const;
};

struct Ontology {
    std::vector<OntologyLevel> levels;
    std::vector<HierarchyEdge> hierarchy;
    OntologyConfig config;
    std::string config_digest;

    const OntologyLevel* level(int l) const;
    const OntologyClass* find(const std::string& id) const;
    /// Violations of the structural invariants, one message each.
    std::vector<std::string> integrity_errors() const;
};

/// Class graph for community detection: node i is kg.classes[i], edges symmetrized,
/// parallel edges collapsed, self-loops dropped.
UndirectedGraph graph_from_kg(const KnowledgeGraph& kg);

/// Union of member class properties plus ("relationship", label) for every edge with both
/// endpoints inside `members`, self-loops included.
PropertySet aggregate_properties(const KnowledgeGraph& kg, const std::set<std::string>& members);

/// Renders properties as "key: value" lines, the form handed to the provider.
std::vector<std::string> render_properties(const PropertySet& properties);

/// Provider-generalized property list. On provider or format failure returns the rendered
/// raw set and appends a warning.
std::vector<std::string> synthesize_properties(Provider& provider, const TemplateStore& templates,
                                               const PropertySet& aggregated,
                                               std::vector<std::string>& warnings);

/// Edges between classes of different communities, grouped per ordered (source, target)
/// pair. `community_of` maps candidate-class id to ontology class id.
std::vector<OntologyRelationship> project_relationships(
    const KnowledgeGraph& kg, const std::map<std::string, std::string>& community_of);

/// Labels present in both directions of a pair become one undirected relationship
/// (source < target); the rest stay directed. Output sorted; idempotent.
std::vector<OntologyRelationship> merge_symmetric(std::span<const OntologyRelationship> relationships);

/// Candidate-class id -> chunks its key elements came from.
std::map<std::string, std::set<std::string>> class_chunk_sources(
    const KnowledgeGraph& kg, std::span<const KeyElement> key_elements);

/// Leveled partition, properties and relationships; no provider calls. Level 0 partitions
/// the whole graph; each community of size > 2 is re-partitioned on its induced subgraph.
/// A community that cannot be split further is carried down unchanged as a single child,
/// so every level covers every candidate class.
Ontology build_hierarchy(const KnowledgeGraph& kg,
                         const std::map<std::string, std::set<std::string>>& chunk_sources,
                         const OntologyConfig& config);

/// Fills synthesized properties, names, definitions and embeddings for every class.
void name_and_embed_classes(Ontology& ontology, Provider& provider, const TemplateStore& templates,
                            std::size_t threads = 0);

Ontology build_ontology(const KnowledgeGraph& kg, std::span<const KeyElement> key_elements,
                        Provider& provider, const TemplateStore& templates,
                        const OntologyConfig& config);

json to_json(const OntologyConfig& c);
OntologyConfig ontology_config_from_json(const json& j);
json to_json(const Ontology& o);
Ontology ontology_from_json(const json& j);

}  // namespace ontorag
