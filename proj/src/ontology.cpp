#include "ontorag/ontology.hpp"

#include "ontorag/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ontorag {

double OntologyConfig::resolution_at(std::size_t level) const {
    if (resolutions.empty()) return 1.0;
    return resolutions[std::min(level, resolutions.size() - 1)];
}

void OntologyConfig::validate() const {
    if (max_depth == 0) throw ConfigError("ontology.depth: must be at least 1");
    for (double r : resolutions) {
        if (!(r > 0.0)) throw ConfigError("ontology.resolution: values must be positive");
    }
    if (!(leiden.theta > 0.0)) throw ConfigError("ontology.theta: must be positive");
}

const OntologyLevel* Ontology::level(int l) const {
    for (const auto& lv : levels) {
        if (lv.level == l) return &lv;
    }
    return nullptr;
}

const OntologyClass* Ontology::find(const std::string& id) const {
    for (const auto& lv : levels) {
        for (const auto& c : lv.classes) {
            if (c.id == id) return &c;
        }
    }
    return nullptr;
}

std::vector<std::string> Ontology::integrity_errors() const {
    std::vector<std::string> errors;
    std::set<std::string> all_members;
    bool first = true;
    std::map<std::string, std::string> parent_of;
    for (const auto& e : hierarchy) {
        if (!parent_of.emplace(e.child, e.parent).second) {
            errors.push_back("class " + e.child + " has more than one parent");
        }
    }
    auto unit_or_empty = [](const Embedding& v) {
        return v.empty() || std::abs(norm(v) - 1.0) < 1e-6;
    };
    for (const auto& lv : levels) {
        std::set<std::string> seen;
        std::set<std::string> ids;
        for (const auto& c : lv.classes) {
            ids.insert(c.id);
            if (c.level != lv.level) errors.push_back("class " + c.id + " sits in the wrong level");
            if (c.members.empty()) errors.push_back("class " + c.id + " has no members");
            for (const auto& m : c.members) {
                if (!seen.insert(m).second) {
                    errors.push_back("level " + std::to_string(lv.level) + ": member " + m +
                                     " appears in more than one class");
                }
            }
            if (!unit_or_empty(c.name_embedding) || !unit_or_empty(c.def_embedding)) {
                errors.push_back("class " + c.id + " has a non-unit embedding");
            }
            if (lv.level > 0) {
                auto p = parent_of.find(c.id);
                const OntologyClass* parent = p == parent_of.end() ? nullptr : find(p->second);
                if (parent == nullptr || parent->level != lv.level - 1) {
                    errors.push_back("class " + c.id + " has no parent one level up");
                } else if (!std::includes(parent->members.begin(), parent->members.end(),
                                          c.members.begin(), c.members.end())) {
                    errors.push_back("class " + c.id + " has members outside its parent " + parent->id);
                }
            }
        }
        if (first) {
            all_members = seen;
            first = false;
        } else if (seen != all_members) {
            errors.push_back("level " + std::to_string(lv.level) + " does not cover the same classes as level 0");
        }
        for (const auto& r : lv.relationships) {
            if (ids.count(r.source) == 0 || ids.count(r.target) == 0) {
                errors.push_back("relationship " + r.source + " -> " + r.target +
                                 " references a class outside level " + std::to_string(lv.level));
            }
            if (r.source == r.target) {
                errors.push_back("relationship on " + r.source + " is intra-community");
            }
            if (r.labels.empty()) {
                errors.push_back("relationship " + r.source + " -> " + r.target + " has no labels");
            }
        }
    }
    return errors;
}

UndirectedGraph graph_from_kg(const KnowledgeGraph& kg) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < kg.classes.size(); ++i) index[kg.classes[i].id] = i;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : kg.edges) {
        auto a = index.find(e.source);
        auto b = index.find(e.target);
        if (a == index.end() || b == index.end()) {
            throw IntegrityError("edge " + e.source + " -> " + e.target + " references a missing class");
        }
        edges.emplace_back(a->second, b->second);
    }
    return UndirectedGraph(kg.classes.size(), edges);
}

PropertySet aggregate_properties(const KnowledgeGraph& kg, const std::set<std::string>& members) {
    PropertySet out;
    for (const auto& c : kg.classes) {
        if (members.count(c.id)) out.insert(c.properties.begin(), c.properties.end());
    }
    for (const auto& e : kg.edges) {
        if (members.count(e.source) && members.count(e.target)) {
            out.insert({"relationship", e.label});
        }
    }
    return out;
}

std::vector<std::string> render_properties(const PropertySet& properties) {
    std::vector<std::string> out;
    out.reserve(properties.size());
    for (const auto& [k, v] : properties) out.push_back(k + ": " + v);
    return out;
}

std::vector<std::string> synthesize_properties(Provider& provider, const TemplateStore& templates,
                                               const PropertySet& aggregated,
                                               std::vector<std::string>& warnings) {
    const std::vector<std::string> raw = render_properties(aggregated);
    try {
        const json reply = complete_structured(provider, templates, "synthesize_properties",
                                               {{"input", json(raw).dump()}});
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& p : reply) {
            std::string s = trim(p.get<std::string>());
            if (!s.empty() && seen.insert(s).second) out.push_back(std::move(s));
        }
        if (!out.empty()) return out;
        warnings.push_back("property synthesis returned nothing; kept the aggregated set");
    } catch (const ProviderError& e) {
        warnings.push_back(std::string("property synthesis failed; kept the aggregated set: ") + e.what());
    } catch (const FormatError& e) {
        warnings.push_back(std::string("property synthesis failed; kept the aggregated set: ") + e.what());
    }
    return raw;
}

std::vector<OntologyRelationship> project_relationships(
    const KnowledgeGraph& kg, const std::map<std::string, std::string>& community_of) {
    std::map<std::pair<std::string, std::string>, std::set<std::string>> grouped;
    auto lookup = [&](const std::string& id) -> const std::string& {
        auto it = community_of.find(id);
        if (it == community_of.end()) {
            throw IntegrityError("candidate class " + id + " belongs to no community");
        }
        return it->second;
    };
    for (const auto& e : kg.edges) {
        const std::string& a = lookup(e.source);
        const std::string& b = lookup(e.target);
        if (a != b) grouped[{a, b}].insert(e.label);
    }
    std::vector<OntologyRelationship> out;
    for (auto& [key, labels] : grouped) {
        out.push_back({key.first, key.second, std::move(labels), true});
    }
    return out;
}

std::vector<OntologyRelationship> merge_symmetric(std::span<const OntologyRelationship> relationships) {
    using Key = std::pair<std::string, std::string>;
    std::map<Key, std::set<std::string>> directed;
    std::map<Key, std::set<std::string>> undirected;
    for (const auto& r : relationships) {
        if (r.directed) {
            directed[{r.source, r.target}].insert(r.labels.begin(), r.labels.end());
        } else {
            const Key k = std::minmax(r.source, r.target);
            undirected[k].insert(r.labels.begin(), r.labels.end());
        }
    }
    for (auto& [key, labels] : directed) {
        if (key.first >= key.second) continue;
        auto reverse = directed.find({key.second, key.first});
        if (reverse == directed.end()) continue;
        std::vector<std::string> shared;
        std::set_intersection(labels.begin(), labels.end(), reverse->second.begin(),
                              reverse->second.end(), std::back_inserter(shared));
        for (const auto& l : shared) {
            labels.erase(l);
            reverse->second.erase(l);
            undirected[key].insert(l);
        }
    }
    std::vector<OntologyRelationship> out;
    for (auto& [key, labels] : directed) {
        if (!labels.empty()) out.push_back({key.first, key.second, std::move(labels), true});
    }
    for (auto& [key, labels] : undirected) {
        if (!labels.empty()) out.push_back({key.first, key.second, std::move(labels), false});
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::map<std::string, std::set<std::string>> class_chunk_sources(
    const KnowledgeGraph& kg, std::span<const KeyElement> key_elements) {
    std::map<std::string, const KeyElement*> store;
    for (const auto& k : key_elements) store[k.id] = &k;
    std::map<std::string, std::set<std::string>> out;
    for (const auto& c : kg.classes) {
        auto& chunks = out[c.id];
        for (const auto& m : c.member_ids) {
            auto it = store.find(m);
            if (it == store.end()) {
                throw IntegrityError("class " + c.id + " references unknown key element " + m);
            }
            chunks.insert(it->second->source_chunk_ids.begin(), it->second->source_chunk_ids.end());
        }
    }
    return out;
}

namespace {

std::string ontology_class_id(std::size_t level, std::size_t n) {
    return "O" + std::to_string(level) + "-" + zero_pad(n, 4);
}

struct Group {
    std::vector<std::size_t> nodes;  // sorted graph node indices
    std::string parent;
    bool splittable = true;
};

std::vector<Group> groups_from(const Partition& p, std::span<const std::size_t> local_to_global,
                               const std::string& parent) {
    std::vector<Group> out;
    for (auto& members : p.communities()) {
        Group g;
        g.parent = parent;
        for (auto v : members) g.nodes.push_back(local_to_global[v]);
        std::sort(g.nodes.begin(), g.nodes.end());
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace

Ontology build_hierarchy(const KnowledgeGraph& kg,
                         const std::map<std::string, std::set<std::string>>& chunk_sources,
                         const OntologyConfig& config) {
    config.validate();
    const UndirectedGraph graph = graph_from_kg(kg);
    const std::size_t n = graph.node_count();
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;

    Ontology onto;
    onto.config = config;

    std::vector<Group> groups;
    if (n > 0) {
        groups = groups_from(leiden(graph, config.resolution_at(0), config.seed, config.leiden), all, "");
    }

    for (std::size_t level = 0; level < config.max_depth; ++level) {
        if (level > 0) {
            const auto& parents = onto.levels.back().classes;
            std::vector<std::vector<Group>> children(parents.size());
            std::vector<Group> previous = std::move(groups);
            parallel_for(parents.size(), config.threads, [&](std::size_t i) {
                const Group& g = previous[i];
                Group carried{g.nodes, parents[i].id, false};
                if (!g.splittable || g.nodes.size() <= 2) {
                    children[i].push_back(std::move(carried));
                    return;
                }
                const UndirectedGraph sub = graph.induced(g.nodes);
                const Partition p = leiden(sub, config.resolution_at(level),
                                           hash_combine(config.seed, parents[i].id), config.leiden);
                if (p.community_count <= 1) {
                    children[i].push_back(std::move(carried));
                } else {
                    children[i] = groups_from(p, g.nodes, parents[i].id);
                }
            });
            groups.clear();
            for (auto& c : children) {
                for (auto& g : c) groups.push_back(std::move(g));
            }
        }

        OntologyLevel lv;
        lv.level = static_cast<int>(level);
        lv.resolution = config.resolution_at(level);
        std::vector<std::size_t> membership(n, 0);
        std::map<std::string, std::string> community_of;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            OntologyClass c;
            c.id = ontology_class_id(level, gi);
            c.level = lv.level;
            c.parent = groups[gi].parent;
            for (auto v : groups[gi].nodes) {
                const std::string& cid = kg.classes[v].id;
                c.members.insert(cid);
                community_of[cid] = c.id;
                membership[v] = gi;
                if (auto it = chunk_sources.find(cid); it != chunk_sources.end()) {
                    c.source_chunk_ids.insert(it->second.begin(), it->second.end());
                }
            }
            c.aggregated_properties = aggregate_properties(kg, c.members);
            if (!c.parent.empty()) onto.hierarchy.push_back({c.parent, c.id});
            lv.classes.push_back(std::move(c));
        }
        if (graph.edge_count() > 0) {
            lv.modularity = modularity(graph, Partition::from_membership(membership));
        }
        const auto projected = project_relationships(kg, community_of);
        lv.relationships = merge_symmetric(projected);
        onto.levels.push_back(std::move(lv));
    }
    return onto;
}

void name_and_embed_classes(Ontology& ontology, Provider& provider, const TemplateStore& templates,
                            std::size_t threads) {
    std::vector<OntologyClass*> classes;
    for (auto& lv : ontology.levels) {
        for (auto& c : lv.classes) classes.push_back(&c);
    }
    parallel_for(classes.size(), threads, [&](std::size_t i) {
        OntologyClass& c = *classes[i];
        c.warnings.clear();
        c.synthesized_properties =
            synthesize_properties(provider, templates, c.aggregated_properties, c.warnings);
        const json reply = complete_structured(provider, templates, "name_class",
                                               {{"input", json(c.synthesized_properties).dump()}});
        c.name = trim(reply.at("name").get<std::string>());
        c.definition = trim(reply.at("definition").get<std::string>());
    });
    std::vector<std::string> texts;
    texts.reserve(classes.size() * 2);
    for (const auto* c : classes) {
        texts.push_back(c->name);
        texts.push_back(c->definition);
    }
    if (texts.empty()) return;
    const auto vectors = provider.embed(texts);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        classes[i]->name_embedding = vectors[2 * i];
        classes[i]->def_embedding = vectors[2 * i + 1];
    }
}

Ontology build_ontology(const KnowledgeGraph& kg, std::span<const KeyElement> key_elements,
                        Provider& provider, const TemplateStore& templates,
                        const OntologyConfig& config) {
    Ontology onto = build_hierarchy(kg, class_chunk_sources(kg, key_elements), config);
    name_and_embed_classes(onto, provider, templates, config.threads);
    return onto;
}

json to_json(const OntologyConfig& c) {
    return json{{"depth", c.max_depth},
                {"resolutions", c.resolutions},
                {"seed", c.seed},
                {"theta", c.leiden.theta},
                {"max_passes", c.leiden.max_passes},
                {"restarts", c.leiden.restarts}};
}

OntologyConfig ontology_config_from_json(const json& j) {
    OntologyConfig c;
    c.max_depth = j.value("depth", c.max_depth);
    if (j.contains("resolutions")) {
        c.resolutions = j.at("resolutions").get<std::vector<double>>();
    } else if (j.contains("resolution")) {
        c.resolutions = {j.at("resolution").get<double>()};
    }
    c.seed = j.value("seed", c.seed);
    c.leiden.theta = j.value("theta", c.leiden.theta);
    c.leiden.max_passes = j.value("max_passes", c.leiden.max_passes);
    c.leiden.restarts = j.value("restarts", c.leiden.restarts);
    c.threads = j.value("threads", c.threads);
    return c;
}

namespace {

json class_to_json(const OntologyClass& c) {
    json props = json::array();
    for (const auto& [k, v] : c.aggregated_properties) props.push_back({k, v});
    return json{{"id", c.id},
                {"level", c.level},
                {"parent", c.parent},
                {"members", c.members},
                {"properties", props},
                {"synthesized_properties", c.synthesized_properties},
                {"name", c.name},
                {"definition", c.definition},
                {"name_embedding", c.name_embedding},
                {"def_embedding", c.def_embedding},
                {"source_chunk_ids", c.source_chunk_ids},
                {"warnings", c.warnings}};
}

OntologyClass class_from_json(const json& j) {
    OntologyClass c;
    c.id = j.at("id").get<std::string>();
    c.level = j.at("level").get<int>();
    c.parent = j.value("parent", std::string());
    c.members = j.at("members").get<std::set<std::string>>();
    for (const auto& p : j.at("properties")) {
        c.aggregated_properties.insert({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
    }
    c.synthesized_properties = j.value("synthesized_properties", std::vector<std::string>{});
    c.name = j.value("name", std::string());
    c.definition = j.value("definition", std::string());
    c.name_embedding = j.value("name_embedding", Embedding{});
    c.def_embedding = j.value("def_embedding", Embedding{});
    c.source_chunk_ids = j.value("source_chunk_ids", std::set<std::string>{});
    c.warnings = j.value("warnings", std::vector<std::string>{});
    return c;
}

}  // namespace

json to_json(const Ontology& o) {
    json levels = json::array();
    for (const auto& lv : o.levels) {
        json classes = json::array();
        for (const auto& c : lv.classes) classes.push_back(class_to_json(c));
        json rels = json::array();
        for (const auto& r : lv.relationships) {
            rels.push_back({{"source", r.source},
                            {"target", r.target},
                            {"labels", r.labels},
                            {"directed", r.directed}});
        }
        levels.push_back({{"level", lv.level},
                          {"resolution", lv.resolution},
                          {"modularity", lv.modularity ? json(*lv.modularity) : json(nullptr)},
                          {"classes", classes},
                          {"relationships", rels}});
    }
    json hierarchy = json::array();
    for (const auto& e : o.hierarchy) {
        hierarchy.push_back({{"parent", e.parent}, {"child", e.child}, {"relation", "IS-A"}});
    }
    return json{{"config", to_json(o.config)},
                {"config_digest", o.config_digest},
                {"levels", levels},
                {"hierarchy", hierarchy}};
}

Ontology ontology_from_json(const json& j) {
    Ontology o;
    o.config = ontology_config_from_json(j.value("config", json::object()));
    o.config_digest = j.value("config_digest", std::string());
    for (const auto& l : j.at("levels")) {
        OntologyLevel lv;
        lv.level = l.at("level").get<int>();
        lv.resolution = l.value("resolution", 1.0);
        if (l.contains("modularity") && !l.at("modularity").is_null()) {
            lv.modularity = l.at("modularity").get<double>();
        }
        for (const auto& c : l.at("classes")) lv.classes.push_back(class_from_json(c));
        for (const auto& r : l.value("relationships", json::array())) {
            lv.relationships.push_back({r.at("source").get<std::string>(),
                                        r.at("target").get<std::string>(),
                                        r.at("labels").get<std::set<std::string>>(),
                                        r.value("directed", true)});
        }
        o.levels.push_back(std::move(lv));
    }
    for (const auto& e : j.value("hierarchy", json::array())) {
        o.hierarchy.push_back({e.at("parent").get<std::string>(), e.at("child").get<std::string>()});
    }
    return o;
}

}  // namespace ontorag
