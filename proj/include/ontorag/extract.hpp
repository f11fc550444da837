#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ontorag/chunker.hpp"
#include "ontorag/providers.hpp"
#include "ontorag/templates.hpp"

namespace ontorag {

/// Subject-predicate-object statement extracted from a chunk.
struct Proposition {
    std::string subject;
    std::string predicate;
    std::string object;
    std::string chunk_id;
    std::vector<std::string> key_entities;
};

struct GraphNode {
    std::string name;
    std::string part_of_speech = "noun";
    std::map<std::string, std::string> properties;
    /// Canonical key-element id, filled in after mapping.
    std::string canonical_id;
};

struct GraphRelationship {
    std::string relationship_type;
    std::string source_node;
    std::string target_node;

    friend auto operator<=>(const GraphRelationship&, const GraphRelationship&) = default;
};

/// Nodes and typed relationships of one chunk. Node names are unique; every
/// relationship endpoint names an existing node.
struct ChunkGraph {
    std::string chunk_id;
    std::vector<Proposition> propositions;
    std::vector<GraphNode> nodes;
    std::vector<GraphRelationship> relationships;

    const GraphNode* find_node(const std::string& name) const;
    /// Empty when referentially sound, otherwise one message per dangling endpoint.
    std::vector<std::string> integrity_errors() const;
};

using Property = std::pair<std::string, std::string>;
using PropertySet = std::set<Property>;

struct KeyElement {
    std::string id;
    std::string name;
    std::string definition;
    Embedding name_embedding;
    Embedding def_embedding;
    std::set<std::string> source_chunk_ids;
    PropertySet properties;
};

struct CanonicalEntry {
    std::string name;
    Embedding name_embedding;
};

struct MappedMention {
    std::string canonical_id;
    double confidence = 0.0;
};

/// Raw mention -> canonical element. Canonical ids only ever grow.
struct CanonicalMap {
    std::map<std::string, CanonicalEntry> canonicals;  // id -> entry
    std::map<std::string, MappedMention> mentions;     // raw mention -> id
    std::size_t next_id = 0;

    std::string id_for(const std::string& mention) const;
};

struct Mention {
    std::string text;
    Embedding embedding;
};

/// Maps each mention to the canonical element with the highest name cosine at or above
/// `threshold` (ties go to the lower id); otherwise the mention founds a new canonical.
/// Mentions already in the map keep their mapping.
CanonicalMap map_key_elements(std::span<const Mention> mentions, CanonicalMap canon,
                              double confidence_threshold = 0.9);

/// Builds nodes (one per distinct subject/object) and deduplicated relationships.
ChunkGraph build_chunk_graph(std::span<const Proposition> propositions);

struct ExtractConfig {
    double confidence_threshold = 0.9;
    std::size_t threads = 0;  ///< 0 = hardware concurrency
    std::size_t max_context_chars = 4000;
};

class Extractor {
public:
    Extractor(ProviderPtr provider, const TemplateStore& templates);

    Chunk clean_text(const Chunk& chunk) const;
    Chunk disambiguate(const Chunk& chunk) const;
    std::vector<std::string> ner(const Chunk& chunk) const;
    /// Keeps key entities that are either recognized entities or slot strings.
    std::vector<Proposition> extract_atomic_facts(const Chunk& chunk,
                                                  std::span<const std::string> entities) const;
    /// Definitions and both embeddings for canonical terms, using their source chunks as context.
    std::vector<KeyElement> define_and_embed(const CanonicalMap& canon,
                                             const std::map<std::string, std::set<std::string>>& sources,
                                             const std::map<std::string, const Chunk*>& chunks_by_id) const;

private:
    ProviderPtr provider_;
    const TemplateStore& templates_;
};

struct ExtractResult {
    std::vector<Chunk> cleaned_chunks;
    std::vector<ChunkGraph> chunk_graphs;
    std::vector<KeyElement> key_elements;
    CanonicalMap canon;
};

/// Runs every extraction step over the chunks. Per-chunk work runs in parallel; canonical
/// mapping is applied in chunk order.
ExtractResult run_extract(ProviderPtr provider, const TemplateStore& templates,
                          std::span<const Chunk> chunks, const ExtractConfig& config);

json to_json(const ChunkGraph& g);
ChunkGraph chunk_graph_from_json(const json& j);
json to_json(const KeyElement& k);
KeyElement key_element_from_json(const json& j);
json to_json(const CanonicalMap& m);
CanonicalMap canonical_map_from_json(const json& j);

}  // namespace ontorag
