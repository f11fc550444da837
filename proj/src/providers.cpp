#include "ontorag/providers.hpp"

#include "ontorag/errors.hpp"

#include <cmath>

namespace ontorag {

namespace fs = std::filesystem;

void ProviderConfig::validate() const {
    if (kind == ProviderKind::http && endpoint.empty()) {
        throw ConfigError("provider: http kind requires an endpoint");
    }
    if (kind == ProviderKind::mock && dimension == 0) {
        throw ConfigError("provider: mock dimension must be positive");
    }
    if (retries < 0) {
        throw ConfigError("provider: retries must be non-negative");
    }
    if (timeout_seconds <= 0.0) {
        throw ConfigError("provider: timeout must be positive");
    }
}

ProviderConfig provider_config_from_json(const json& j) {
    ProviderConfig c;
    const std::string kind = j.value("kind", std::string("mock"));
    if (kind == "mock") {
        c.kind = ProviderKind::mock;
    } else if (kind == "http") {
        c.kind = ProviderKind::http;
    } else {
        throw ConfigError("provider.kind: expected mock or http, got '" + kind + "'");
    }
    c.model = j.value("model", c.model);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.completion_path = j.value("completion_path", c.completion_path);
    c.embedding_path = j.value("embedding_path", c.embedding_path);
    c.prompt_field = j.value("prompt_field", c.prompt_field);
    c.text_field = j.value("text_field", c.text_field);
    c.inputs_field = j.value("inputs_field", c.inputs_field);
    c.vectors_field = j.value("vectors_field", c.vectors_field);
    c.auth_env = j.value("auth_env", c.auth_env);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.retries = j.value("retries", c.retries);
    c.retry_backoff_seconds = j.value("retry_backoff_seconds", c.retry_backoff_seconds);
    c.requests_per_second = j.value("requests_per_second", c.requests_per_second);
    c.dimension = j.value("dimension", c.dimension);
    c.seed = j.value("seed", c.seed);
    if (j.contains("fixtures") && !j["fixtures"].is_null()) {
        c.fixtures = j["fixtures"].get<std::string>();
    }
    if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
        c.cache_dir = j["cache_dir"].get<std::string>();
    }
    return c;
}

json to_json(const ProviderConfig& c) {
    return json{{"kind", c.kind == ProviderKind::mock ? "mock" : "http"},
                {"model", c.model},
                {"endpoint", c.endpoint},
                {"completion_path", c.completion_path},
                {"embedding_path", c.embedding_path},
                {"prompt_field", c.prompt_field},
                {"text_field", c.text_field},
                {"inputs_field", c.inputs_field},
                {"vectors_field", c.vectors_field},
                {"auth_env", c.auth_env},
                {"timeout_seconds", c.timeout_seconds},
                {"retries", c.retries},
                {"retry_backoff_seconds", c.retry_backoff_seconds},
                {"requests_per_second", c.requests_per_second},
                {"dimension", c.dimension},
                {"seed", c.seed},
                {"fixtures", c.fixtures.string()},
                {"cache_dir", c.cache_dir.string()}};
}

json provider_identity(const ProviderConfig& c) {
    json j{{"kind", c.kind == ProviderKind::mock ? "mock" : "http"}, {"model", c.model}};
    if (c.kind == ProviderKind::mock) {
        j["dimension"] = c.dimension;
        j["seed"] = c.seed;
        j["fixtures"] = c.fixtures.empty() ? std::string() : file_digest(c.fixtures);
    } else {
        j["endpoint"] = c.endpoint;
    }
    return j;
}

Embedding Provider::embed_one(const std::string& text) {
    std::vector<std::string> batch{text};
    auto out = embed(batch);
    if (out.size() != 1) {
        throw ProviderError("embedding backend returned " + std::to_string(out.size()) +
                            " vectors for 1 input");
    }
    return std::move(out.front());
}

// ---------------------------------------------------------------------------
// CachingProvider

CachingProvider::CachingProvider(ProviderPtr inner, fs::path dir, std::string identity)
    : inner_(std::move(inner)), dir_(std::move(dir)), identity_(std::move(identity)) {
    fs::create_directories(dir_);
}

std::string CachingProvider::completion_key(const CompletionRequest& request) const {
    json k{{"kind", inner_->kind()},
           {"model", inner_->model()},
           {"identity", identity_},
           {"template", request.template_id},
           {"prompt", request.rendered_prompt},
           {"temperature", request.temperature}};
    return json_digest(k);
}

std::string CachingProvider::embedding_key(const std::string& text) const {
    json k{{"kind", inner_->kind()}, {"model", inner_->model()}, {"identity", identity_}, {"embed", text}};
    return json_digest(k);
}

std::optional<json> CachingProvider::lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const fs::path p = dir_ / (key + ".json");
    if (!fs::exists(p)) {
        return std::nullopt;
    }
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error&) {
        return std::nullopt;  // treated as a miss and overwritten
    }
}

void CachingProvider::store(const std::string& key, const json& value) {
    std::unique_lock lock(mutex_);
    write_file_atomic(dir_ / (key + ".json"), value.dump());
}

std::string CachingProvider::complete(const CompletionRequest& request) {
    const std::string key = completion_key(request);
    if (auto hit = lookup(key); hit && hit->contains("text")) {
        return (*hit)["text"].get<std::string>();
    }
    std::string text = inner_->complete(request);
    store(key, json{{"template", request.template_id}, {"text", text}});
    return text;
}

std::vector<Embedding> CachingProvider::embed(std::span<const std::string> texts) {
    std::vector<Embedding> out(texts.size());
    std::vector<std::string> missing;
    std::map<std::string, std::vector<std::size_t>> missing_index;  // text -> output slots
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) {
            throw InvalidArgument("cannot embed an empty string");
        }
        if (auto it = missing_index.find(texts[i]); it != missing_index.end()) {
            it->second.push_back(i);
        } else if (auto hit = lookup(embedding_key(texts[i])); hit && hit->contains("vector")) {
            out[i] = (*hit)["vector"].get<Embedding>();
        } else {
            missing.push_back(texts[i]);
            missing_index[texts[i]].push_back(i);
        }
    }
    if (!missing.empty()) {
        auto fresh = inner_->embed(missing);
        if (fresh.size() != missing.size()) {
            throw ProviderError("embedding backend returned the wrong number of vectors");
        }
        for (std::size_t k = 0; k < fresh.size(); ++k) {
            store(embedding_key(missing[k]), json{{"vector", fresh[k]}});
            for (std::size_t slot : missing_index[missing[k]]) out[slot] = fresh[k];
        }
    }
    return out;
}

ProviderPtr make_provider(const ProviderConfig& config) {
    config.validate();
    ProviderPtr base;
    if (config.kind == ProviderKind::mock) {
        auto mock = std::make_shared<MockProvider>(config);
        base = mock;
    } else {
        base = std::make_shared<HttpProvider>(config);
    }
    if (!config.cache_dir.empty()) {
        return std::make_shared<CachingProvider>(base, config.cache_dir, json_digest(provider_identity(config)));
    }
    return base;
}

// ---------------------------------------------------------------------------
// Structured completions

std::optional<json> extract_json(const std::string& reply) {
    const std::string text = trim(reply);
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
    }
    // Fall back to the outermost bracketed region, which also strips code fences.
    for (char open : {'[', '{'}) {
        const char close = open == '[' ? ']' : '}';
        const std::size_t b = text.find(open);
        const std::size_t e = text.rfind(close);
        if (b != std::string::npos && e != std::string::npos && e > b) {
            try {
                return json::parse(text.substr(b, e - b + 1));
            } catch (const json::parse_error&) {
            }
        }
    }
    return std::nullopt;
}

namespace {

CompletionRequest make_request(const TemplateStore& templates, const std::string& id,
                               const TemplateVars& vars) {
    const PromptTemplate& t = templates.get(id);
    CompletionRequest r;
    r.template_id = id;
    r.rendered_prompt = templates.render(id, vars);
    r.variables = vars;
    r.temperature = t.temperature;
    r.max_output_tokens = t.max_output_tokens;
    return r;
}

}  // namespace

json complete_structured(Provider& provider, const TemplateStore& templates,
                         const std::string& template_id, const TemplateVars& vars,
                         const std::function<std::optional<std::string>(const json&)>& check) {
    CompletionRequest request = make_request(templates, template_id, vars);
    const json& schema = templates.get(template_id).output_schema;
    std::string problem;
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::string reply = provider.complete(request);
        auto parsed = extract_json(reply);
        if (!parsed) {
            problem = "reply is not JSON";
        } else if (auto err = validate_schema(*parsed, schema)) {
            problem = *err;
        } else if (check) {
            if (auto extra = check(*parsed)) {
                problem = *extra;
            } else {
                return *parsed;
            }
        } else {
            return *parsed;
        }
        request.rendered_prompt += "\n\nYour previous reply was rejected (" + problem +
                                   "). Reply with valid JSON only.";
        request.variables["reprompt"] = problem;
    }
    throw FormatError("template '" + template_id + "': " + problem);
}

std::string complete_text(Provider& provider, const TemplateStore& templates,
                          const std::string& template_id, const TemplateVars& vars) {
    return provider.complete(make_request(templates, template_id, vars));
}

}  // namespace ontorag
