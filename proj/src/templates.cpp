#include "ontorag/templates.hpp"

#include "ontorag/errors.hpp"

#include <cstdlib>

#ifndef ONTORAG_TEMPLATE_DIR
#define ONTORAG_TEMPLATE_DIR "templates"
#endif

namespace ontorag {

namespace fs = std::filesystem;

TemplateStore::TemplateStore(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw ConfigError("template manifest not found: " + manifest_path.string());
    }
    const json manifest = read_json(manifest_path);
    for (const auto& [id, meta] : manifest.at("templates").items()) {
        PromptTemplate t;
        t.id = id;
        t.version = meta.value("version", 1);
        t.body = read_file(dir / (id + ".tmpl"));
        t.output_schema = meta.value("output", json());
        t.temperature = meta.value("temperature", 0.0);
        t.max_output_tokens = meta.value("max_output_tokens", 1024);
        templates_.emplace(id, std::move(t));
    }
}

fs::path TemplateStore::default_dir() {
    if (const char* env = std::getenv("ONTORAG_TEMPLATES"); env != nullptr && *env != '\0') {
        return env;
    }
    return ONTORAG_TEMPLATE_DIR;
}

TemplateStore TemplateStore::load_default() { return TemplateStore(default_dir()); }

const PromptTemplate& TemplateStore::get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) {
        throw ConfigError("unknown prompt template '" + id + "'");
    }
    return it->second;
}

void TemplateStore::add(PromptTemplate t) {
    std::string id = t.id;
    templates_[id] = std::move(t);
}

std::string TemplateStore::render(const std::string& id, const TemplateVars& vars) const {
    const std::string& body = get(id).body;
    std::string out;
    out.reserve(body.size());
    std::size_t pos = 0;
    while (pos < body.size()) {
        const std::size_t open = body.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body, pos, std::string::npos);
            break;
        }
        const std::size_t close = body.find("}}", open + 2);
        if (close == std::string::npos) {
            throw InvalidArgument("template '" + id + "': unterminated placeholder");
        }
        out.append(body, pos, open - pos);
        const std::string name = trim(std::string_view(body).substr(open + 2, close - open - 2));
        auto it = vars.find(name);
        if (it == vars.end()) {
            throw InvalidArgument("template '" + id + "': no value for '" + name + "'");
        }
        out += it->second;
        pos = close + 2;
    }
    return out;
}

std::string TemplateStore::digest() const {
    json j = json::object();
    for (const auto& [id, t] : templates_) {
        j[id] = {{"version", t.version}, {"body", sha256_hex(t.body)}};
    }
    return json_digest(j);
}

namespace {

bool type_matches(const json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "number") return v.is_number();
    if (type == "integer") return v.is_number_integer();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    return false;
}

}  // namespace

std::optional<std::string> validate_schema(const json& value, const json& schema,
                                           const std::string& path) {
    if (schema.is_null() || !schema.is_object()) {
        return std::nullopt;
    }
    if (auto it = schema.find("type"); it != schema.end()) {
        const auto type = it->get<std::string>();
        if (!type_matches(value, type)) {
            return path + ": expected " + type;
        }
    }
    if (auto it = schema.find("enum"); it != schema.end()) {
        bool found = false;
        for (const auto& option : *it) {
            if (option == value) found = true;
        }
        if (!found) return path + ": value not in enum";
    }
    if (value.is_string()) {
        if (auto it = schema.find("minLength"); it != schema.end()) {
            if (trim(value.get<std::string>()).size() < it->get<std::size_t>()) {
                return path + ": string too short";
            }
        }
    }
    if (value.is_array()) {
        if (auto it = schema.find("minItems"); it != schema.end() && value.size() < it->get<std::size_t>()) {
            return path + ": too few items";
        }
        if (auto it = schema.find("maxItems"); it != schema.end() && value.size() > it->get<std::size_t>()) {
            return path + ": too many items";
        }
        if (auto it = schema.find("items"); it != schema.end()) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (auto err = validate_schema(value[i], *it, path + "[" + std::to_string(i) + "]")) {
                    return err;
                }
            }
        }
    }
    if (value.is_object()) {
        if (auto it = schema.find("required"); it != schema.end()) {
            for (const auto& key : *it) {
                if (!value.contains(key.get<std::string>())) {
                    return path + ": missing '" + key.get<std::string>() + "'";
                }
            }
        }
        if (auto it = schema.find("properties"); it != schema.end()) {
            for (const auto& [key, sub] : it->items()) {
                if (value.contains(key)) {
                    if (auto err = validate_schema(value.at(key), sub, path + "." + key)) {
                        return err;
                    }
                }
            }
        }
    }
    return std::nullopt;
}

}  // namespace ontorag
