#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ontorag/elements.hpp"
#include "ontorag/util.hpp"

namespace ontorag {

/// A contiguous, token-bounded span of element text within one document.
struct Chunk {
    std::string id;
    std::string doc_id;
    std::vector<std::string> element_ids;
    std::string text;
    std::size_t token_count = 0;
    std::size_t seq = 0;
};

struct ChunkingConfig {
    std::size_t min_tokens = 200;
    std::size_t max_tokens = 1000;
    double similarity_threshold = 0.8;
    std::size_t neighbor_window = 1;

    void validate() const;
};

struct SweepRow {
    double threshold = 0.0;
    std::size_t chunk_count = 0;
    /// Bucket lower bound (multiple of the bucket width) -> number of chunks.
    std::map<std::size_t, std::size_t> size_histogram;
    double mean_tokens = 0.0;
    double median_tokens = 0.0;
};

struct SweepReport {
    std::size_t bucket_width = 100;
    std::vector<SweepRow> rows;
};

/// Chunk id for position `seq` of a document, e.g. "manual:c0003".
std::string make_chunk_id(std::string_view doc_id, std::size_t seq, char prefix = 'c');

/// Title-boundary chunking. A chunk closes at a title once it holds min_tokens, or
/// before any element that would push it past max_tokens. A lone element longer than
/// max_tokens becomes its own chunk. Documents never share a chunk.
std::vector<Chunk> hybrid_chunk(std::span<const DocumentElement> elements,
                                const ChunkingConfig& config);

/// output[i] joins the texts of chunks[i - window .. i + window], clipped to the list.
std::vector<std::string> combine_neighbors(std::span<const Chunk> chunks, std::size_t window);

/// Greedy left-to-right merge of neighbours whose embeddings have cosine >= threshold.
/// A merge that would exceed `max_tokens` is refused. Chunks from different documents
/// never merge. Output is renumbered per document.
std::vector<Chunk> semantic_merge(std::span<const Chunk> chunks,
                                  std::span<const std::vector<double>> embeddings,
                                  double threshold,
                                  std::size_t max_tokens = std::numeric_limits<std::size_t>::max());

SweepReport threshold_sweep(std::span<const Chunk> chunks,
                            std::span<const std::vector<double>> embeddings,
                            std::span<const double> thresholds,
                            std::size_t max_tokens = std::numeric_limits<std::size_t>::max(),
                            std::size_t bucket_width = 100);

/// Fixed-size windows of `size_tokens`, starting every size_tokens - overlap_tokens tokens.
/// The returned chunks carry no element ids.
std::vector<Chunk> fixed_chunk(std::string_view text, std::size_t size_tokens = 600,
                               std::size_t overlap_tokens = 100, std::string_view doc_id = "");

/// Fixed-size chunking over whole documents; element_ids lists every element a window touches.
std::vector<Chunk> fixed_chunk_elements(std::span<const DocumentElement> elements,
                                        std::size_t size_tokens = 600,
                                        std::size_t overlap_tokens = 100);

/// Text of a run of elements as the chunker sees it.
std::string join_element_text(std::span<const DocumentElement* const> elements);

json to_json(const Chunk& c);
Chunk chunk_from_json(const json& j);
json to_json(const SweepReport& r);

std::vector<Chunk> load_chunks(const std::filesystem::path& path);
std::string serialize_chunks(std::span<const Chunk> chunks);

}  // namespace ontorag
