#include "ontorag/chunker.hpp"

#include "ontorag/errors.hpp"
#include "ontorag/tokenizer.hpp"

#include <algorithm>
#include <numeric>

namespace ontorag {

void ChunkingConfig::validate() const {
    if (min_tokens == 0 || max_tokens == 0) {
        throw InvalidArgument("min_tokens and max_tokens must be positive");
    }
    if (min_tokens >= max_tokens) {
        throw InvalidArgument("min_tokens must be below max_tokens");
    }
    if (similarity_threshold < -1.0 || similarity_threshold > 1.0) {
        throw InvalidArgument("similarity_threshold must lie in [-1, 1]");
    }
    if (neighbor_window == 0) {
        throw InvalidArgument("neighbor_window must be positive");
    }
}

std::string make_chunk_id(std::string_view doc_id, std::size_t seq, char prefix) {
    return std::string(doc_id) + ":" + prefix + zero_pad(seq, 4);
}

std::string join_element_text(std::span<const DocumentElement* const> elements) {
    std::string out;
    for (const auto* e : elements) {
        std::string t = trim(e->text);
        if (t.empty()) continue;
        if (!out.empty()) out += '\n';
        out += t;
    }
    return out;
}

namespace {

struct OpenChunk {
    std::vector<const DocumentElement*> elements;
    std::size_t tokens = 0;
};

}  // namespace

std::vector<Chunk> hybrid_chunk(std::span<const DocumentElement> elements,
                                const ChunkingConfig& config) {
    config.validate();
    std::vector<Chunk> out;
    std::map<std::string, std::size_t> next_seq;
    OpenChunk current;

    auto close = [&]() {
        if (current.elements.empty()) return;
        Chunk c;
        c.doc_id = current.elements.front()->doc_id;
        c.seq = next_seq[c.doc_id]++;
        c.id = make_chunk_id(c.doc_id, c.seq);
        for (const auto* e : current.elements) c.element_ids.push_back(e->id);
        c.text = join_element_text(current.elements);
        c.token_count = count_tokens(c.text);
        out.push_back(std::move(c));
        current = {};
    };

    for (const auto& e : elements) {
        const std::size_t t = count_tokens(e.text);
        if (!current.elements.empty()) {
            const bool new_document = current.elements.front()->doc_id != e.doc_id;
            const bool title_boundary =
                e.kind == ElementKind::title && current.tokens >= config.min_tokens;
            const bool overflow = current.tokens + t > config.max_tokens;
            if (new_document || title_boundary || overflow) {
                close();
            }
        }
        current.elements.push_back(&e);
        current.tokens += t;
    }
    close();
    return out;
}

std::vector<std::string> combine_neighbors(std::span<const Chunk> chunks, std::size_t window) {
    if (window == 0) {
        throw InvalidArgument("window must be at least 1");
    }
    std::vector<std::string> out;
    out.reserve(chunks.size());
    const std::size_t n = chunks.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= window ? i - window : 0;
        const std::size_t hi = std::min(n - 1, i + window);
        std::string s;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (j > lo) s += ' ';
            s += chunks[j].text;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Chunk> semantic_merge(std::span<const Chunk> chunks,
                                  std::span<const std::vector<double>> embeddings,
                                  double threshold, std::size_t max_tokens) {
    if (chunks.size() != embeddings.size()) {
        throw InvalidArgument("semantic_merge: " + std::to_string(chunks.size()) + " chunks but " +
                              std::to_string(embeddings.size()) + " embeddings");
    }
    std::vector<Chunk> out;
    std::map<std::string, std::size_t> next_seq;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const bool joins =
            !out.empty() && i > 0 && chunks[i - 1].doc_id == chunks[i].doc_id &&
            cosine(embeddings[i - 1], embeddings[i]) >= threshold &&
            out.back().token_count + chunks[i].token_count <= max_tokens;
        if (joins) {
            Chunk& merged = out.back();
            if (!merged.text.empty() && !chunks[i].text.empty()) merged.text += '\n';
            merged.text += chunks[i].text;
            merged.element_ids.insert(merged.element_ids.end(), chunks[i].element_ids.begin(),
                                      chunks[i].element_ids.end());
            merged.token_count = count_tokens(merged.text);
            continue;
        }
        Chunk c = chunks[i];
        c.seq = next_seq[c.doc_id]++;
        c.id = make_chunk_id(c.doc_id, c.seq);
        out.push_back(std::move(c));
    }
    return out;
}

SweepReport threshold_sweep(std::span<const Chunk> chunks,
                            std::span<const std::vector<double>> embeddings,
                            std::span<const double> thresholds, std::size_t max_tokens,
                            std::size_t bucket_width) {
    if (bucket_width == 0) {
        throw InvalidArgument("bucket_width must be positive");
    }
    SweepReport report;
    report.bucket_width = bucket_width;
    for (double t : thresholds) {
        const auto merged = semantic_merge(chunks, embeddings, t, max_tokens);
        SweepRow row;
        row.threshold = t;
        row.chunk_count = merged.size();
        std::vector<std::size_t> sizes;
        for (const auto& c : merged) {
            sizes.push_back(c.token_count);
            row.size_histogram[(c.token_count / bucket_width) * bucket_width]++;
        }
        if (!sizes.empty()) {
            row.mean_tokens = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(),
                                                                  std::size_t{0})) /
                              static_cast<double>(sizes.size());
            std::sort(sizes.begin(), sizes.end());
            const std::size_t mid = sizes.size() / 2;
            row.median_tokens = sizes.size() % 2 == 1
                                    ? static_cast<double>(sizes[mid])
                                    : (static_cast<double>(sizes[mid - 1]) + sizes[mid]) / 2.0;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<Chunk> fixed_chunk(std::string_view text, std::size_t size_tokens,
                               std::size_t overlap_tokens, std::string_view doc_id) {
    if (size_tokens == 0 || overlap_tokens >= size_tokens) {
        throw InvalidArgument("fixed_chunk: overlap must be smaller than a positive window size");
    }
    const auto tokens = tokenize(text);
    std::vector<Chunk> out;
    const std::size_t step = size_tokens - overlap_tokens;
    for (std::size_t start = 0; start < tokens.size(); start += step) {
        const std::size_t end = std::min(tokens.size(), start + size_tokens);
        Chunk c;
        c.doc_id = std::string(doc_id);
        c.seq = out.size();
        c.id = make_chunk_id(doc_id, c.seq, 'f');
        c.text = std::string(text.substr(tokens[start].begin, tokens[end - 1].end - tokens[start].begin));
        c.token_count = end - start;
        out.push_back(std::move(c));
        if (end == tokens.size()) break;
    }
    return out;
}

std::vector<Chunk> fixed_chunk_elements(std::span<const DocumentElement> elements,
                                        std::size_t size_tokens, std::size_t overlap_tokens) {
    // Group by document, keeping first-appearance order.
    std::vector<std::string> doc_order;
    std::map<std::string, std::vector<const DocumentElement*>> by_doc;
    for (const auto& e : elements) {
        auto [it, inserted] = by_doc.try_emplace(e.doc_id);
        if (inserted) doc_order.push_back(e.doc_id);
        it->second.push_back(&e);
    }

    std::vector<Chunk> out;
    for (const auto& doc_id : doc_order) {
        const auto& members = by_doc[doc_id];
        // Byte range of each element inside the joined document text.
        std::string text;
        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        std::vector<const DocumentElement*> owners;
        for (const auto* e : members) {
            std::string t = trim(e->text);
            if (t.empty()) continue;
            if (!text.empty()) text += '\n';
            ranges.emplace_back(text.size(), text.size() + t.size());
            owners.push_back(e);
            text += t;
        }
        auto windows = fixed_chunk(text, size_tokens, overlap_tokens, doc_id);
        const auto tokens = tokenize(text);
        std::size_t token_cursor = 0;
        const std::size_t step = size_tokens - overlap_tokens;
        for (auto& w : windows) {
            const std::size_t start = token_cursor;
            const std::size_t end = std::min(tokens.size(), start + size_tokens);
            const std::size_t byte_lo = tokens[start].begin;
            const std::size_t byte_hi = tokens[end - 1].end;
            for (std::size_t k = 0; k < ranges.size(); ++k) {
                if (ranges[k].first < byte_hi && ranges[k].second > byte_lo) {
                    w.element_ids.push_back(owners[k]->id);
                }
            }
            token_cursor += step;
            out.push_back(std::move(w));
        }
    }
    return out;
}

json to_json(const Chunk& c) {
    return json{{"id", c.id},
                {"doc_id", c.doc_id},
                {"element_ids", c.element_ids},
                {"text", c.text},
                {"token_count", c.token_count},
                {"seq", c.seq}};
}

Chunk chunk_from_json(const json& j) {
    Chunk c;
    c.id = j.at("id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.element_ids = j.at("element_ids").get<std::vector<std::string>>();
    c.text = j.at("text").get<std::string>();
    c.token_count = j.at("token_count").get<std::size_t>();
    c.seq = j.at("seq").get<std::size_t>();
    return c;
}

json to_json(const SweepReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        json hist = json::object();
        for (const auto& [bucket, count] : row.size_histogram) {
            hist[std::to_string(bucket)] = count;
        }
        rows.push_back({{"threshold", row.threshold},
                        {"chunk_count", row.chunk_count},
                        {"size_histogram", hist},
                        {"mean_tokens", row.mean_tokens},
                        {"median_tokens", row.median_tokens}});
    }
    return json{{"bucket_width", r.bucket_width}, {"rows", rows}};
}

std::vector<Chunk> load_chunks(const std::filesystem::path& path) {
    std::vector<Chunk> out;
    std::size_t line = 0;
    for (const auto& j : read_jsonl(path)) {
        ++line;
        try {
            out.push_back(chunk_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError(line, e.what());
        }
    }
    return out;
}

std::string serialize_chunks(std::span<const Chunk> chunks) {
    std::string out;
    for (const auto& c : chunks) {
        out += to_json(c).dump();
        out += '\n';
    }
    return out;
}

}  // namespace ontorag
