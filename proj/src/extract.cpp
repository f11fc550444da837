#include "ontorag/extract.hpp"

#include "ontorag/errors.hpp"

#include <algorithm>

namespace ontorag {

const GraphNode* ChunkGraph::find_node(const std::string& name) const {
    for (const auto& n : nodes) {
        if (n.name == name) return &n;
    }
    return nullptr;
}

std::vector<std::string> ChunkGraph::integrity_errors() const {
    std::vector<std::string> errors;
    std::set<std::string> names;
    for (const auto& n : nodes) {
        if (!names.insert(n.name).second) {
            errors.push_back(chunk_id + ": duplicate node '" + n.name + "'");
        }
    }
    for (const auto& r : relationships) {
        for (const auto* end : {&r.source_node, &r.target_node}) {
            if (names.count(*end) == 0) {
                errors.push_back(chunk_id + ": relationship '" + r.relationship_type +
                                 "' references missing node '" + *end + "'");
            }
        }
    }
    return errors;
}

std::string CanonicalMap::id_for(const std::string& mention) const {
    auto it = mentions.find(mention);
    if (it == mentions.end()) {
        throw IntegrityError("mention '" + mention + "' has no canonical element");
    }
    return it->second.canonical_id;
}

CanonicalMap map_key_elements(std::span<const Mention> mentions, CanonicalMap canon,
                              double confidence_threshold) {
    if (confidence_threshold < 0.0 || confidence_threshold > 1.0) {
        throw InvalidArgument("confidence threshold must lie in [0, 1]");
    }
    for (const auto& m : mentions) {
        if (canon.mentions.count(m.text) > 0) {
            continue;
        }
        const std::string* best_id = nullptr;
        double best = -2.0;
        // std::map iterates ids in ascending order, so strict '>' keeps the lower id on ties.
        for (const auto& [id, entry] : canon.canonicals) {
            const double c = cosine(m.embedding, entry.name_embedding);
            if (c > best) {
                best = c;
                best_id = &id;
            }
        }
        if (best_id != nullptr && best >= confidence_threshold) {
            canon.mentions[m.text] = {*best_id, std::min(1.0, best)};
            continue;
        }
        std::string id = "K" + zero_pad(canon.next_id++, 6);
        while (canon.canonicals.count(id) > 0) {
            id = "K" + zero_pad(canon.next_id++, 6);
        }
        canon.canonicals[id] = {m.text, m.embedding};
        canon.mentions[m.text] = {id, 1.0};
    }
    return canon;
}

ChunkGraph build_chunk_graph(std::span<const Proposition> propositions) {
    ChunkGraph g;
    if (propositions.empty()) {
        return g;
    }
    g.chunk_id = propositions.front().chunk_id;
    std::set<std::string> names;
    std::set<GraphRelationship> seen;
    auto add_node = [&](const std::string& name) {
        if (names.insert(name).second) {
            GraphNode n;
            n.name = name;
            g.nodes.push_back(std::move(n));
        }
    };
    for (const auto& p : propositions) {
        if (p.chunk_id != g.chunk_id) {
            throw InvalidArgument("build_chunk_graph: propositions span chunks '" + g.chunk_id +
                                  "' and '" + p.chunk_id + "'");
        }
        g.propositions.push_back(p);
        add_node(p.subject);
        add_node(p.object);
        GraphRelationship r{p.predicate, p.subject, p.object};
        if (seen.insert(r).second) {
            g.relationships.push_back(std::move(r));
        }
    }
    return g;
}

// ---------------------------------------------------------------------------

Extractor::Extractor(ProviderPtr provider, const TemplateStore& templates)
    : provider_(std::move(provider)), templates_(templates) {}

Chunk Extractor::clean_text(const Chunk& chunk) const {
    if (trim(chunk.text).empty()) return chunk;
    Chunk out = chunk;
    out.text = trim(complete_text(*provider_, templates_, "clean_text", {{"input", chunk.text}}));
    return out;
}

Chunk Extractor::disambiguate(const Chunk& chunk) const {
    if (trim(chunk.text).empty()) return chunk;
    Chunk out = chunk;
    out.text = trim(complete_text(*provider_, templates_, "disambiguate", {{"input", chunk.text}}));
    return out;
}

std::vector<std::string> Extractor::ner(const Chunk& chunk) const {
    if (trim(chunk.text).empty()) return {};
    const json reply = complete_structured(*provider_, templates_, "ner", {{"input", chunk.text}});
    std::vector<std::string> out;
    for (const auto& e : reply) {
        std::string name = trim(e.get<std::string>());
        if (!name.empty() && std::find(out.begin(), out.end(), name) == out.end()) {
            out.push_back(std::move(name));
        }
    }
    return out;
}

std::vector<Proposition> Extractor::extract_atomic_facts(const Chunk& chunk,
                                                         std::span<const std::string> entities) const {
    if (trim(chunk.text).empty()) return {};
    const json reply = complete_structured(
        *provider_, templates_, "extract_facts",
        {{"input", chunk.text}, {"entities", json(std::vector<std::string>(entities.begin(), entities.end())).dump()}});
    std::vector<Proposition> out;
    for (const auto& f : reply) {
        Proposition p;
        p.subject = trim(f.at("subject").get<std::string>());
        p.predicate = trim(f.at("predicate").get<std::string>());
        p.object = trim(f.at("object").get<std::string>());
        p.chunk_id = chunk.id;
        std::set<std::string> allowed(entities.begin(), entities.end());
        allowed.insert({p.subject, p.predicate, p.object});
        for (const auto& k : f.value("key_entities", json::array())) {
            std::string key = trim(k.get<std::string>());
            if (allowed.count(key) > 0 &&
                std::find(p.key_entities.begin(), p.key_entities.end(), key) == p.key_entities.end()) {
                p.key_entities.push_back(std::move(key));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<KeyElement> Extractor::define_and_embed(
    const CanonicalMap& canon, const std::map<std::string, std::set<std::string>>& sources,
    const std::map<std::string, const Chunk*>& chunks_by_id) const {
    std::vector<std::string> ids;
    for (const auto& [id, entry] : canon.canonicals) ids.push_back(id);

    std::vector<KeyElement> out(ids.size());
    parallel_for(ids.size(), 0, [&](std::size_t i) {
        const auto& entry = canon.canonicals.at(ids[i]);
        KeyElement k;
        k.id = ids[i];
        k.name = entry.name;
        std::string context;
        if (auto it = sources.find(k.id); it != sources.end()) {
            k.source_chunk_ids = it->second;
            for (const auto& cid : it->second) {
                auto c = chunks_by_id.find(cid);
                if (c == chunks_by_id.end()) continue;
                if (!context.empty()) context += "\n\n";
                context += c->second->text;
            }
        }
        const json reply = complete_structured(*provider_, templates_, "define_term",
                                               {{"input", k.name}, {"context", context}});
        k.definition = trim(reply.at("definition").get<std::string>());
        out[i] = std::move(k);
    });

    // Embed in two batches so the backend sees as few requests as possible.
    std::vector<std::string> names;
    std::vector<std::string> defs;
    for (const auto& k : out) {
        names.push_back(k.name);
        defs.push_back(k.definition);
    }
    if (!out.empty()) {
        auto name_vecs = provider_->embed(names);
        auto def_vecs = provider_->embed(defs);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i].name_embedding = std::move(name_vecs[i]);
            out[i].def_embedding = std::move(def_vecs[i]);
            out[i].properties.insert({"name", out[i].name});
            out[i].properties.insert({"definition", out[i].definition});
        }
    }
    for (const auto& [mention, mapped] : canon.mentions) {
        auto pos = std::lower_bound(ids.begin(), ids.end(), mapped.canonical_id);
        if (pos != ids.end() && *pos == mapped.canonical_id) {
            out[static_cast<std::size_t>(pos - ids.begin())].properties.insert({"mention", mention});
        }
    }
    return out;
}

ExtractResult run_extract(ProviderPtr provider, const TemplateStore& templates,
                          std::span<const Chunk> chunks, const ExtractConfig& config) {
    Extractor ex(provider, templates);
    ExtractResult result;
    result.cleaned_chunks.resize(chunks.size());
    result.chunk_graphs.resize(chunks.size());

    parallel_for(chunks.size(), config.threads, [&](std::size_t i) {
        Chunk c = ex.disambiguate(ex.clean_text(chunks[i]));
        const auto entities = ex.ner(c);
        const auto facts = ex.extract_atomic_facts(c, entities);
        ChunkGraph g = build_chunk_graph(facts);
        g.chunk_id = c.id;
        for (auto& node : g.nodes) {
            node.properties["mention"] = node.name;
        }
        result.chunk_graphs[i] = std::move(g);
        result.cleaned_chunks[i] = std::move(c);
    });

    // Canonical mapping is single-writer and follows chunk order.
    std::vector<std::string> mention_texts;
    std::set<std::string> seen;
    for (const auto& g : result.chunk_graphs) {
        for (const auto& n : g.nodes) {
            if (seen.insert(n.name).second) mention_texts.push_back(n.name);
        }
    }
    std::vector<Mention> mentions;
    if (!mention_texts.empty()) {
        auto vecs = provider->embed(mention_texts);
        for (std::size_t i = 0; i < mention_texts.size(); ++i) {
            mentions.push_back({mention_texts[i], std::move(vecs[i])});
        }
    }
    result.canon = map_key_elements(mentions, {}, config.confidence_threshold);

    std::map<std::string, std::set<std::string>> sources;
    for (auto& g : result.chunk_graphs) {
        for (auto& n : g.nodes) {
            n.canonical_id = result.canon.id_for(n.name);
            sources[n.canonical_id].insert(g.chunk_id);
        }
    }
    std::map<std::string, const Chunk*> by_id;
    for (const auto& c : result.cleaned_chunks) by_id[c.id] = &c;
    result.key_elements = ex.define_and_embed(result.canon, sources, by_id);
    return result;
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const ChunkGraph& g) {
    json props = json::array();
    for (const auto& p : g.propositions) {
        props.push_back({{"subject", p.subject},
                         {"predicate", p.predicate},
                         {"object", p.object},
                         {"key_entities", p.key_entities}});
    }
    json nodes = json::array();
    for (const auto& n : g.nodes) {
        json node{{"name", n.name}, {"part_of_speech", n.part_of_speech}, {"properties", n.properties}};
        if (!n.canonical_id.empty()) node["canonical_id"] = n.canonical_id;
        nodes.push_back(std::move(node));
    }
    json rels = json::array();
    for (const auto& r : g.relationships) {
        rels.push_back({{"relationship_type", r.relationship_type},
                        {"source_node", r.source_node},
                        {"target_node", r.target_node}});
    }
    return json{{"chunk_id", g.chunk_id}, {"propositions", props}, {"nodes", nodes},
                {"relationships", rels}};
}

ChunkGraph chunk_graph_from_json(const json& j) {
    ChunkGraph g;
    g.chunk_id = j.at("chunk_id").get<std::string>();
    for (const auto& p : j.value("propositions", json::array())) {
        Proposition prop;
        prop.subject = p.at("subject").get<std::string>();
        prop.predicate = p.at("predicate").get<std::string>();
        prop.object = p.at("object").get<std::string>();
        prop.chunk_id = g.chunk_id;
        prop.key_entities = p.value("key_entities", std::vector<std::string>{});
        g.propositions.push_back(std::move(prop));
    }
    for (const auto& n : j.at("nodes")) {
        GraphNode node;
        node.name = n.at("name").get<std::string>();
        node.part_of_speech = n.value("part_of_speech", std::string("noun"));
        node.properties = n.value("properties", std::map<std::string, std::string>{});
        node.canonical_id = n.value("canonical_id", std::string());
        g.nodes.push_back(std::move(node));
    }
    for (const auto& r : j.at("relationships")) {
        g.relationships.push_back({r.at("relationship_type").get<std::string>(),
                                   r.at("source_node").get<std::string>(),
                                   r.at("target_node").get<std::string>()});
    }
    return g;
}

json to_json(const KeyElement& k) {
    json props = json::array();
    for (const auto& [key, value] : k.properties) props.push_back({key, value});
    return json{{"id", k.id},
                {"name", k.name},
                {"definition", k.definition},
                {"name_embedding", k.name_embedding},
                {"def_embedding", k.def_embedding},
                {"source_chunk_ids", k.source_chunk_ids},
                {"properties", props}};
}

KeyElement key_element_from_json(const json& j) {
    KeyElement k;
    k.id = j.at("id").get<std::string>();
    k.name = j.at("name").get<std::string>();
    k.definition = j.at("definition").get<std::string>();
    k.name_embedding = j.at("name_embedding").get<Embedding>();
    k.def_embedding = j.at("def_embedding").get<Embedding>();
    k.source_chunk_ids = j.at("source_chunk_ids").get<std::set<std::string>>();
    for (const auto& p : j.at("properties")) {
        k.properties.insert({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
    }
    return k;
}

json to_json(const CanonicalMap& m) {
    json canonicals = json::object();
    for (const auto& [id, e] : m.canonicals) {
        canonicals[id] = {{"name", e.name}, {"name_embedding", e.name_embedding}};
    }
    json mentions = json::object();
    for (const auto& [text, mm] : m.mentions) {
        mentions[text] = {{"canonical_id", mm.canonical_id}, {"confidence", mm.confidence}};
    }
    return json{{"canonicals", canonicals}, {"mentions", mentions}, {"next_id", m.next_id}};
}

CanonicalMap canonical_map_from_json(const json& j) {
    CanonicalMap m;
    for (const auto& [id, e] : j.at("canonicals").items()) {
        m.canonicals[id] = {e.at("name").get<std::string>(), e.at("name_embedding").get<Embedding>()};
    }
    for (const auto& [text, mm] : j.at("mentions").items()) {
        m.mentions[text] = {mm.at("canonical_id").get<std::string>(), mm.at("confidence").get<double>()};
    }
    m.next_id = j.value("next_id", m.canonicals.size());
    return m;
}

}  // namespace ontorag
