#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "ontorag/util.hpp"

namespace ontorag {

using TemplateVars = std::map<std::string, std::string>;

struct PromptTemplate {
    std::string id;
    int version = 1;
    std::string body;
    /// JSON-schema subset the reply must satisfy; null for free-text templates.
    json output_schema;
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

/// Prompt templates loaded from a directory holding `manifest.json` and `<id>.tmpl` files.
/// Placeholders are written `{{name}}`.
class TemplateStore {
public:
    TemplateStore() = default;
    explicit TemplateStore(const std::filesystem::path& dir);

    /// Directory from $ONTORAG_TEMPLATES, else the path baked in at build time.
    static TemplateStore load_default();
    static std::filesystem::path default_dir();

    const PromptTemplate& get(const std::string& id) const;
    bool contains(const std::string& id) const { return templates_.count(id) > 0; }

    /// Substitutes every `{{name}}`; unknown placeholders raise InvalidArgument.
    std::string render(const std::string& id, const TemplateVars& vars) const;

    /// Digest over every template body and version, for provenance records.
    std::string digest() const;

    void add(PromptTemplate t);

private:
    std::map<std::string, PromptTemplate> templates_;
};

/// Validates `value` against a small JSON-schema subset: type, items, required,
/// properties, minItems, maxItems, minLength, enum. Returns an error message or nullopt.
std::optional<std::string> validate_schema(const json& value, const json& schema,
                                           const std::string& path = "$");

}  // namespace ontorag
