#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ontorag/chunker.hpp"
#include "ontorag/ontology.hpp"
#include "ontorag/providers.hpp"
#include "ontorag/tokenizer.hpp"
#include "ontorag/templates.hpp"

namespace ontorag {

struct RetrievalConfig {
    int level = 0;
    std::size_t top_k_classes = 5;
    std::size_t context_window_tokens = 200;
    std::size_t max_context_tokens = 8000;
    double name_weight = 0.5;
    double def_weight = 0.5;

    void validate() const;
};

json to_json(const RetrievalConfig& c);
RetrievalConfig retrieval_config_from_json(const json& j);

struct QueryKey {
    std::string name;
    Embedding name_embedding;
};

struct QueryKeys {
    std::vector<QueryKey> keys;
    /// The whole query, embedded once; plays the role of the keys' shared definition.
    Embedding query_embedding;
};

struct ClassMatch {
    std::string class_id;
    double score = 0.0;
    /// Key that produced the best score.
    std::string key;
};

/// One contiguous token range of a document handed to the answer model.
struct ContextSpan {
    std::string doc_id;
    std::size_t token_begin = 0;
    std::size_t token_end = 0;
    std::string text;
    /// Source chunks whose (expanded) ranges were coalesced into this span.
    std::vector<std::string> chunk_ids;
    std::string class_id;
    double score = 0.0;

    std::size_t tokens() const { return token_end - token_begin; }
};

struct RetrievalContext {
    std::vector<ContextSpan> spans;
    std::size_t total_tokens = 0;

    bool empty() const { return spans.empty(); }
    /// Span texts separated by blank lines.
    std::string text() const;
};

/// Chunks laid end to end per document, giving every chunk a token range in its
/// document's stream.
class ChunkStore {
public:
    explicit ChunkStore(std::vector<Chunk> chunks);

    struct Location {
        std::string doc_id;
        std::size_t begin = 0;
        std::size_t end = 0;
    };

    const Chunk* find(const std::string& id) const;
    const Location* locate(const std::string& chunk_id) const;
    std::size_t document_tokens(const std::string& doc_id) const;
    /// Original text covering tokens [begin, end) of a document.
    std::string slice(const std::string& doc_id, std::size_t begin, std::size_t end) const;
    const std::vector<Chunk>& chunks() const { return chunks_; }

private:
    struct Document {
        std::string text;
        std::vector<TokenSpan> tokens;
    };
    std::vector<Chunk> chunks_;
    std::map<std::string, std::size_t> by_id_;
    std::map<std::string, Location> locations_;
    std::map<std::string, Document> documents_;
};

/// Provider-extracted key terms of the query, embedded. An empty extraction falls back to
/// the whole query as the only key.
QueryKeys extract_query_keys(Provider& provider, const TemplateStore& templates,
                             const std::string& query);

/// Per key, the top_k classes of the configured level by
/// name_weight * cos(key, class name) + def_weight * cos(query, class definition).
/// Returns the union ranked by best score descending, then class id.
std::vector<ClassMatch> match_classes(const QueryKeys& keys, const Ontology& ontology,
                                      const RetrievalConfig& config);

/// Expands each matched class's source chunks by the context window and coalesces
/// overlapping spans of a document; spans that merely touch stay separate. Spans are
/// appended in match order until the budget would be exceeded. A first span larger than
/// the budget is truncated to fit.
RetrievalContext gather_chunks(std::span<const ClassMatch> matches, const Ontology& ontology,
                               const ChunkStore& store, const RetrievalConfig& config);

struct Answer {
    std::string text;
    bool refused = false;
};

/// Answers from the context; an empty context yields the refusal template without a
/// provider call.
Answer answer(Provider& provider, const TemplateStore& templates, const std::string& query,
              const RetrievalContext& context);

struct QueryResult {
    std::string query;
    std::string condition;
    RetrievalConfig config;
    std::vector<std::string> keys;
    std::vector<ClassMatch> matches;
    RetrievalContext context;
    Answer answer;
};

QueryResult ontology_query(Provider& provider, const TemplateStore& templates,
                           const Ontology& ontology, const ChunkStore& store,
                           const std::string& query, const RetrievalConfig& config);

struct VectorIndex {
    std::string model;
    std::vector<Chunk> chunks;
    std::vector<Embedding> embeddings;
};

VectorIndex build_vector_index(Provider& provider, std::vector<Chunk> chunks);

/// The top_k chunks by cosine to the query vector, ties broken by chunk id.
RetrievalContext vector_search(const Embedding& query_embedding, const VectorIndex& index,
                               std::size_t top_k);

QueryResult vector_query(Provider& provider, const TemplateStore& templates,
                         const VectorIndex& index, const std::string& query, std::size_t top_k);

json to_json(const QueryResult& r);
json to_json(const RetrievalContext& c);
json to_json(const VectorIndex& index);
VectorIndex vector_index_from_json(const json& j);

}  // namespace ontorag
