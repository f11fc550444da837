#include "ontorag/retrieve.hpp"

#include "ontorag/errors.hpp"
#include "ontorag/tokenizer.hpp"

#include <algorithm>

namespace ontorag {

void RetrievalConfig::validate() const {
    if (top_k_classes == 0) throw ConfigError("retrieval.top_k: must be positive");
    if (max_context_tokens == 0) throw ConfigError("retrieval.max_context_tokens: must be positive");
    if (name_weight < 0.0 || def_weight < 0.0 || name_weight + def_weight <= 0.0) {
        throw ConfigError("retrieval.weights: must be non-negative and not both zero");
    }
}

json to_json(const RetrievalConfig& c) {
    return json{{"level", c.level},
                {"top_k", c.top_k_classes},
                {"window", c.context_window_tokens},
                {"max_context_tokens", c.max_context_tokens},
                {"name_weight", c.name_weight},
                {"def_weight", c.def_weight}};
}

RetrievalConfig retrieval_config_from_json(const json& j) {
    RetrievalConfig c;
    c.level = j.value("level", c.level);
    c.top_k_classes = j.value("top_k", c.top_k_classes);
    c.context_window_tokens = j.value("window", c.context_window_tokens);
    c.max_context_tokens = j.value("max_context_tokens", c.max_context_tokens);
    c.name_weight = j.value("name_weight", c.name_weight);
    c.def_weight = j.value("def_weight", c.def_weight);
    return c;
}

std::string RetrievalContext::text() const {
    std::vector<std::string> parts;
    parts.reserve(spans.size());
    for (const auto& s : spans) parts.push_back(s.text);
    return join(parts, "\n\n");
}

ChunkStore::ChunkStore(std::vector<Chunk> chunks) : chunks_(std::move(chunks)) {
    std::map<std::string, std::vector<std::size_t>> per_doc;
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        if (!by_id_.emplace(chunks_[i].id, i).second) {
            throw ValidationError("duplicate chunk id " + chunks_[i].id);
        }
        per_doc[chunks_[i].doc_id].push_back(i);
    }
    for (auto& [doc, idx] : per_doc) {
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return chunks_[a].seq < chunks_[b].seq;
        });
        Document d;
        std::size_t offset = 0;
        std::vector<std::string> texts;
        for (std::size_t i : idx) {
            const std::size_t n = count_tokens(chunks_[i].text);
            locations_[chunks_[i].id] = {doc, offset, offset + n};
            offset += n;
            texts.push_back(chunks_[i].text);
        }
        d.text = join(texts, "\n");
        d.tokens = tokenize(d.text);
        if (d.tokens.size() != offset) {
            throw ValidationError("document " + doc + ": chunk texts do not tokenize independently");
        }
        documents_[doc] = std::move(d);
    }
}

const Chunk* ChunkStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

const ChunkStore::Location* ChunkStore::locate(const std::string& chunk_id) const {
    auto it = locations_.find(chunk_id);
    return it == locations_.end() ? nullptr : &it->second;
}

std::size_t ChunkStore::document_tokens(const std::string& doc_id) const {
    auto it = documents_.find(doc_id);
    return it == documents_.end() ? 0 : it->second.tokens.size();
}

std::string ChunkStore::slice(const std::string& doc_id, std::size_t begin, std::size_t end) const {
    auto it = documents_.find(doc_id);
    if (it == documents_.end() || begin >= end || end > it->second.tokens.size()) return {};
    const auto& d = it->second;
    return d.text.substr(d.tokens[begin].begin, d.tokens[end - 1].end - d.tokens[begin].begin);
}

QueryKeys extract_query_keys(Provider& provider, const TemplateStore& templates,
                             const std::string& query) {
    if (trim(query).empty()) throw InvalidArgument("query is empty");
    const json reply = complete_structured(provider, templates, "query_keys", {{"input", query}});
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const auto& k : reply) {
        std::string s = trim(k.get<std::string>());
        if (!s.empty() && seen.insert(s).second) names.push_back(std::move(s));
    }
    if (names.empty()) names.push_back(query);

    std::vector<std::string> texts = names;
    texts.push_back(query);
    const auto vectors = provider.embed(texts);
    QueryKeys out;
    for (std::size_t i = 0; i < names.size(); ++i) out.keys.push_back({names[i], vectors[i]});
    out.query_embedding = vectors.back();
    return out;
}

std::vector<ClassMatch> match_classes(const QueryKeys& keys, const Ontology& ontology,
                                      const RetrievalConfig& config) {
    config.validate();
    const OntologyLevel* level = ontology.level(config.level);
    if (level == nullptr) {
        throw ConfigError("retrieval.level: ontology has no level " + std::to_string(config.level));
    }
    const double total = config.name_weight + config.def_weight;
    const double wn = config.name_weight / total;
    const double wd = config.def_weight / total;

    auto ranks_before = [](const ClassMatch& a, const ClassMatch& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.class_id < b.class_id;
    };

    std::map<std::string, ClassMatch> best;
    for (const auto& key : keys.keys) {
        std::vector<ClassMatch> scored;
        scored.reserve(level->classes.size());
        for (const auto& c : level->classes) {
            if (c.name_embedding.empty() || c.def_embedding.empty()) {
                throw ConfigError("class " + c.id + " has no embeddings; rebuild the ontology");
            }
            const double s = wn * cosine(key.name_embedding, c.name_embedding) +
                             wd * cosine(keys.query_embedding, c.def_embedding);
            scored.push_back({c.id, s, key.name});
        }
        std::sort(scored.begin(), scored.end(), ranks_before);
        scored.resize(std::min(scored.size(), config.top_k_classes));
        for (auto& m : scored) {
            auto it = best.find(m.class_id);
            if (it == best.end() || m.score > it->second.score) best[m.class_id] = m;
        }
    }
    std::vector<ClassMatch> out;
    for (auto& [id, m] : best) out.push_back(m);
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
}

RetrievalContext gather_chunks(std::span<const ClassMatch> matches, const Ontology& ontology,
                               const ChunkStore& store, const RetrievalConfig& config) {
    struct Candidate {
        std::size_t rank;
        ContextSpan span;
    };
    std::map<std::string, std::vector<Candidate>> per_doc;
    std::set<std::string> used;
    std::size_t rank = 0;
    for (const auto& m : matches) {
        const OntologyClass* c = ontology.find(m.class_id);
        if (c == nullptr) {
            throw IntegrityError("matched class " + m.class_id + " is not in the ontology");
        }
        for (const auto& chunk_id : c->source_chunk_ids) {
            if (!used.insert(chunk_id).second) continue;
            const ChunkStore::Location* loc = store.locate(chunk_id);
            if (loc == nullptr) {
                throw IntegrityError("class " + c->id + " cites unknown chunk " + chunk_id);
            }
            if (loc->begin == loc->end) continue;
            const std::size_t w = config.context_window_tokens;
            ContextSpan s;
            s.doc_id = loc->doc_id;
            s.token_begin = loc->begin > w ? loc->begin - w : 0;
            s.token_end = std::min(loc->end + w, store.document_tokens(loc->doc_id));
            s.chunk_ids = {chunk_id};
            s.class_id = m.class_id;
            s.score = m.score;
            per_doc[loc->doc_id].push_back({rank++, std::move(s)});
        }
    }

    std::vector<Candidate> merged;
    for (auto& [doc, spans] : per_doc) {
        std::sort(spans.begin(), spans.end(), [](const Candidate& a, const Candidate& b) {
            return a.span.token_begin < b.span.token_begin;
        });
        Candidate cur = spans.front();
        for (std::size_t i = 1; i < spans.size(); ++i) {
            Candidate& next = spans[i];
            if (next.span.token_begin < cur.span.token_end) {
                cur.span.token_end = std::max(cur.span.token_end, next.span.token_end);
                cur.span.chunk_ids.insert(cur.span.chunk_ids.end(), next.span.chunk_ids.begin(),
                                          next.span.chunk_ids.end());
                if (next.rank < cur.rank) {
                    cur.rank = next.rank;
                    cur.span.class_id = next.span.class_id;
                    cur.span.score = next.span.score;
                }
            } else {
                merged.push_back(std::move(cur));
                cur = std::move(next);
            }
        }
        merged.push_back(std::move(cur));
    }
    std::sort(merged.begin(), merged.end(),
              [](const Candidate& a, const Candidate& b) { return a.rank < b.rank; });

    RetrievalContext ctx;
    for (auto& cand : merged) {
        ContextSpan& s = cand.span;
        if (ctx.total_tokens + s.tokens() > config.max_context_tokens) {
            if (ctx.spans.empty()) {
                s.token_end = s.token_begin + config.max_context_tokens;
            } else {
                break;
            }
        }
        std::sort(s.chunk_ids.begin(), s.chunk_ids.end());
        s.text = store.slice(s.doc_id, s.token_begin, s.token_end);
        ctx.total_tokens += s.tokens();
        ctx.spans.push_back(std::move(s));
        if (ctx.total_tokens >= config.max_context_tokens) break;
    }
    return ctx;
}

Answer answer(Provider& provider, const TemplateStore& templates, const std::string& query,
              const RetrievalContext& context) {
    if (context.empty()) {
        return {trim(templates.render("answer_refusal", {{"input", query}})), true};
    }
    return {trim(complete_text(provider, templates, "answer",
                               {{"input", query}, {"context", context.text()}})),
            false};
}

QueryResult ontology_query(Provider& provider, const TemplateStore& templates,
                           const Ontology& ontology, const ChunkStore& store,
                           const std::string& query, const RetrievalConfig& config) {
    QueryResult r;
    r.query = query;
    r.condition = "O" + std::to_string(config.level);
    r.config = config;
    const QueryKeys keys = extract_query_keys(provider, templates, query);
    for (const auto& k : keys.keys) r.keys.push_back(k.name);
    r.matches = match_classes(keys, ontology, config);
    r.context = gather_chunks(r.matches, ontology, store, config);
    r.answer = answer(provider, templates, query, r.context);
    return r;
}

VectorIndex build_vector_index(Provider& provider, std::vector<Chunk> chunks) {
    VectorIndex index;
    index.model = provider.model();
    std::vector<std::string> texts;
    for (auto& c : chunks) {
        if (trim(c.text).empty()) continue;
        texts.push_back(c.text);
        index.chunks.push_back(std::move(c));
    }
    if (!texts.empty()) index.embeddings = provider.embed(texts);
    return index;
}

RetrievalContext vector_search(const Embedding& query_embedding, const VectorIndex& index,
                               std::size_t top_k) {
    if (index.chunks.empty()) throw ConfigError("vector index is empty; run index-baseline first");
    if (index.embeddings.size() != index.chunks.size()) {
        throw IntegrityError("vector index has " + std::to_string(index.embeddings.size()) +
                             " embeddings for " + std::to_string(index.chunks.size()) + " chunks");
    }
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < index.chunks.size(); ++i) {
        scored.emplace_back(cosine(query_embedding, index.embeddings[i]), i);
    }
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return index.chunks[a.second].id < index.chunks[b.second].id;
    });
    RetrievalContext ctx;
    for (std::size_t i = 0; i < scored.size() && i < top_k; ++i) {
        const Chunk& c = index.chunks[scored[i].second];
        ContextSpan s;
        s.doc_id = c.doc_id;
        s.token_begin = 0;
        s.token_end = c.token_count;
        s.text = c.text;
        s.chunk_ids = {c.id};
        s.score = scored[i].first;
        ctx.total_tokens += c.token_count;
        ctx.spans.push_back(std::move(s));
    }
    return ctx;
}

QueryResult vector_query(Provider& provider, const TemplateStore& templates,
                         const VectorIndex& index, const std::string& query, std::size_t top_k) {
    QueryResult r;
    r.query = query;
    r.condition = "SS";
    r.config.top_k_classes = top_k;
    r.config.context_window_tokens = 0;
    r.context = vector_search(provider.embed_one(query), index, top_k);
    r.answer = answer(provider, templates, query, r.context);
    return r;
}

json to_json(const RetrievalContext& c) {
    json spans = json::array();
    for (const auto& s : c.spans) {
        spans.push_back({{"doc_id", s.doc_id},
                         {"token_begin", s.token_begin},
                         {"token_end", s.token_end},
                         {"chunk_ids", s.chunk_ids},
                         {"class_id", s.class_id},
                         {"score", s.score},
                         {"text", s.text}});
    }
    return json{{"spans", spans}, {"total_tokens", c.total_tokens}};
}

json to_json(const QueryResult& r) {
    json matches = json::array();
    for (const auto& m : r.matches) {
        matches.push_back({{"class_id", m.class_id}, {"score", m.score}, {"key", m.key}});
    }
    return json{{"query", r.query},
                {"condition", r.condition},
                {"config", to_json(r.config)},
                {"keys", r.keys},
                {"matches", matches},
                {"context", to_json(r.context)},
                {"answer", r.answer.text},
                {"refused", r.answer.refused}};
}

json to_json(const VectorIndex& index) {
    json chunks = json::array();
    for (std::size_t i = 0; i < index.chunks.size(); ++i) {
        const Chunk& c = index.chunks[i];
        chunks.push_back({{"id", c.id},
                          {"doc_id", c.doc_id},
                          {"text", c.text},
                          {"token_count", c.token_count},
                          {"embedding", index.embeddings.at(i)}});
    }
    return json{{"model", index.model}, {"chunks", chunks}};
}

VectorIndex vector_index_from_json(const json& j) {
    VectorIndex index;
    index.model = j.value("model", std::string());
    for (const auto& c : j.at("chunks")) {
        Chunk chunk;
        chunk.id = c.at("id").get<std::string>();
        chunk.doc_id = c.value("doc_id", std::string());
        chunk.text = c.at("text").get<std::string>();
        chunk.token_count = c.value("token_count", count_tokens(chunk.text));
        index.chunks.push_back(std::move(chunk));
        index.embeddings.push_back(c.at("embedding").get<Embedding>());
    }
    return index;
}

}  // namespace ontorag
