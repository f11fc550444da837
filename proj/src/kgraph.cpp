#include "ontorag/kgraph.hpp"

#include "ontorag/errors.hpp"

#include <algorithm>
#include <numeric>

namespace ontorag {

namespace {

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
        std::iota(parent_.begin(), parent_.end(), std::size_t{0});
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> rank_;
};

void accumulate(Embedding& sum, const Embedding& v) {
    if (sum.empty()) {
        sum = v;
        return;
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
}

Embedding unit(const Embedding& v) {
    Embedding out = v;
    normalize(out);
    return out;
}

std::string class_id(std::size_t n) { return "C" + zero_pad(n, 5); }

}  // namespace

const CandidateClass* KnowledgeGraph::find(const std::string& id) const {
    for (const auto& c : classes) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

std::vector<std::string> KnowledgeGraph::integrity_errors() const {
    std::vector<std::string> errors;
    std::set<std::string> ids;
    std::set<std::string> members;
    for (const auto& c : classes) {
        ids.insert(c.id);
        if (c.member_ids.empty()) errors.push_back("class " + c.id + " has no members");
        for (const auto& m : c.member_ids) {
            if (!members.insert(m).second) {
                errors.push_back("key element " + m + " belongs to more than one class");
            }
        }
    }
    for (const auto& e : edges) {
        if (ids.count(e.source) == 0 || ids.count(e.target) == 0) {
            errors.push_back("edge " + e.source + " -> " + e.target + " references a missing class");
        }
    }
    return errors;
}

int sim(const KeyElement& a, const KeyElement& b, const Thresholds& t) {
    return cosine(a.name_embedding, b.name_embedding) >= t.theta_name &&
                   cosine(a.def_embedding, b.def_embedding) >= t.theta_def
               ? 1
               : 0;
}

std::vector<CandidateClass> cluster_batch(std::span<const KeyElement> batch,
                                          std::vector<CandidateClass> existing,
                                          const Thresholds& t) {
    const std::size_t n = batch.size();
    DisjointSet dsu(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (sim(batch[i], batch[j], t) == 1) dsu.unite(i, j);
        }
    }

    // Batch clusters in order of their first member.
    std::vector<std::vector<std::size_t>> clusters;
    std::map<std::size_t, std::size_t> root_to_cluster;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, inserted] = root_to_cluster.try_emplace(dsu.find(i), clusters.size());
        if (inserted) clusters.emplace_back();
        clusters[it->second].push_back(i);
    }

    const std::size_t pre_existing = existing.size();
    std::size_t next_id = 0;
    for (const auto& c : existing) {
        // Ids are C<number>; continue numbering after the largest one.
        if (c.id.size() > 1 && c.id[0] == 'C') {
            next_id = std::max(next_id, static_cast<std::size_t>(std::stoull(c.id.substr(1))) + 1);
        }
    }

    for (const auto& members : clusters) {
        CandidateClass incoming;
        for (std::size_t idx : members) {
            const KeyElement& k = batch[idx];
            incoming.member_ids.insert(k.id);
            accumulate(incoming.name_sum, k.name_embedding);
            accumulate(incoming.def_sum, k.def_embedding);
            incoming.properties.insert(k.properties.begin(), k.properties.end());
            incoming.properties.insert({"name", k.name});
            incoming.properties.insert({"definition", k.definition});
        }
        const Embedding name_c = unit(incoming.name_sum);
        const Embedding def_c = unit(incoming.def_sum);

        std::size_t best = pre_existing;
        double best_name = -2.0;
        for (std::size_t e = 0; e < pre_existing; ++e) {
            const double cn = cosine(name_c, existing[e].name_centroid);
            const double cd = cosine(def_c, existing[e].def_centroid);
            if (cn >= t.theta_name && cd >= t.theta_def && cn > best_name) {
                best = e;
                best_name = cn;
            }
        }
        if (best < pre_existing) {
            CandidateClass& target = existing[best];
            target.member_ids.insert(incoming.member_ids.begin(), incoming.member_ids.end());
            target.properties.insert(incoming.properties.begin(), incoming.properties.end());
            accumulate(target.name_sum, incoming.name_sum);
            accumulate(target.def_sum, incoming.def_sum);
            target.name_centroid = unit(target.name_sum);
            target.def_centroid = unit(target.def_sum);
        } else {
            incoming.id = class_id(next_id++);
            incoming.name_centroid = name_c;
            incoming.def_centroid = def_c;
            existing.push_back(std::move(incoming));
        }
    }
    return existing;
}

PropertySet union_properties(const CandidateClass& cls,
                             const std::map<std::string, const KeyElement*>& store) {
    PropertySet out;
    for (const auto& id : cls.member_ids) {
        auto it = store.find(id);
        if (it == store.end()) {
            throw IntegrityError("class " + cls.id + " references unknown key element " + id);
        }
        const KeyElement& k = *it->second;
        out.insert(k.properties.begin(), k.properties.end());
        out.insert({"name", k.name});
        out.insert({"definition", k.definition});
    }
    return out;
}

std::set<KgEdge> project_edges(std::span<const ChunkGraph> graphs, const CanonicalMap& canon,
                               std::span<const CandidateClass> classes) {
    std::map<std::string, std::string> owner;  // key element id -> class id
    for (const auto& c : classes) {
        for (const auto& m : c.member_ids) owner[m] = c.id;
    }
    auto class_of = [&](const ChunkGraph& g, const GraphRelationship& r, const std::string& node) {
        auto mention = canon.mentions.find(node);
        if (mention == canon.mentions.end()) {
            throw IntegrityError(g.chunk_id + ": relationship (" + r.relationship_type + ", " +
                                 r.source_node + ", " + r.target_node + ") has unmapped mention '" +
                                 node + "'");
        }
        auto cls = owner.find(mention->second.canonical_id);
        if (cls == owner.end()) {
            throw IntegrityError(g.chunk_id + ": relationship (" + r.relationship_type + ", " +
                                 r.source_node + ", " + r.target_node + ") maps to key element " +
                                 mention->second.canonical_id + " outside every class");
        }
        return cls->second;
    };
    std::set<KgEdge> edges;
    for (const auto& g : graphs) {
        for (const auto& r : g.relationships) {
            edges.insert({class_of(g, r, r.source_node), class_of(g, r, r.target_node),
                          r.relationship_type});
        }
    }
    return edges;
}

KnowledgeGraph build_knowledge_graph(std::span<const KeyElement> key_elements,
                                     std::span<const ChunkGraph> graphs, const CanonicalMap& canon,
                                     const GraphBuildConfig& config) {
    if (config.batch_size == 0) {
        throw InvalidArgument("batch size must be positive");
    }
    KnowledgeGraph kg;
    for (std::size_t start = 0; start < key_elements.size(); start += config.batch_size) {
        const std::size_t len = std::min(config.batch_size, key_elements.size() - start);
        kg.classes = cluster_batch(key_elements.subspan(start, len), std::move(kg.classes),
                                   config.thresholds);
    }
    std::map<std::string, const KeyElement*> store;
    for (const auto& k : key_elements) store[k.id] = &k;
    for (auto& c : kg.classes) {
        c.properties = union_properties(c, store);
    }
    kg.edges = project_edges(graphs, canon, kg.classes);
    return kg;
}

json to_json(const KnowledgeGraph& kg) {
    json classes = json::array();
    for (const auto& c : kg.classes) {
        json props = json::array();
        for (const auto& [k, v] : c.properties) props.push_back({k, v});
        classes.push_back({{"id", c.id},
                           {"member_ids", c.member_ids},
                           {"properties", props},
                           {"name_centroid", c.name_centroid},
                           {"def_centroid", c.def_centroid}});
    }
    json edges = json::array();
    for (const auto& e : kg.edges) edges.push_back({e.source, e.target, e.label});
    return json{{"classes", classes}, {"edges", edges}};
}

KnowledgeGraph knowledge_graph_from_json(const json& j) {
    KnowledgeGraph kg;
    for (const auto& c : j.at("classes")) {
        CandidateClass cls;
        cls.id = c.at("id").get<std::string>();
        cls.member_ids = c.at("member_ids").get<std::set<std::string>>();
        for (const auto& p : c.at("properties")) {
            cls.properties.insert({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
        }
        cls.name_centroid = c.at("name_centroid").get<Embedding>();
        cls.def_centroid = c.at("def_centroid").get<Embedding>();
        cls.name_sum = cls.name_centroid;
        cls.def_sum = cls.def_centroid;
        kg.classes.push_back(std::move(cls));
    }
    for (const auto& e : j.at("edges")) {
        kg.edges.insert({e.at(0).get<std::string>(), e.at(1).get<std::string>(),
                         e.at(2).get<std::string>()});
    }
    return kg;
}

}  // namespace ontorag
