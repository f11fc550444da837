#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "ontorag/templates.hpp"
#include "ontorag/util.hpp"

namespace ontorag {

/// Unit-norm embedding vector.
using Embedding = std::vector<double>;

struct CompletionRequest {
    std::string template_id;
    std::string rendered_prompt;
    /// Values the prompt was rendered from. Only the mock reads them; real backends
    /// see the rendered prompt alone.
    TemplateVars variables;
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

enum class ProviderKind { mock, http };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::mock;
    std::string model = "mock-1";

    // http
    std::string endpoint;
    std::string completion_path = "/v1/complete";
    std::string embedding_path = "/v1/embed";
    std::string prompt_field = "prompt";
    std::string text_field = "text";
    std::string inputs_field = "inputs";
    std::string vectors_field = "vectors";
    std::string auth_env = "ONTORAG_API_KEY";
    double timeout_seconds = 60.0;
    int retries = 3;
    double retry_backoff_seconds = 0.25;
    double requests_per_second = 0.0;  ///< 0 disables rate limiting

    // mock
    std::size_t dimension = 64;
    std::uint64_t seed = 42;
    std::filesystem::path fixtures;

    /// Empty disables the on-disk cache.
    std::filesystem::path cache_dir;

    void validate() const;
};

ProviderConfig provider_config_from_json(const json& j);
json to_json(const ProviderConfig& c);
/// Fields that change model outputs; excludes credentials, paths and timeouts.
json provider_identity(const ProviderConfig& c);

class Provider {
public:
    virtual ~Provider() = default;

    virtual std::string complete(const CompletionRequest& request) = 0;
    /// One unit vector per input. Empty strings are rejected.
    virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;

    virtual std::string kind() const = 0;
    virtual std::string model() const = 0;

    Embedding embed_one(const std::string& text);
};

using ProviderPtr = std::shared_ptr<Provider>;

/// Deterministic offline provider. Completions come from a fixture table keyed by
/// template id and the `input` variable; misses fall back to a rule-based generator per
/// template. Embeddings sum seeded pseudo-random vectors of the text's stemmed tokens.
class MockProvider : public Provider {
public:
    explicit MockProvider(ProviderConfig config = {});

    std::string complete(const CompletionRequest& request) override;
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    std::string kind() const override { return "mock"; }
    std::string model() const override { return config_.model; }

    /// Registers a canned reply for (template_id, input).
    void add_response(const std::string& template_id, const std::string& input,
                      const std::string& output);
    void load_fixtures(const std::filesystem::path& path);

    std::size_t completion_calls() const { return completion_calls_.load(); }
    std::size_t embedding_calls() const { return embedding_calls_.load(); }

    /// Subject-predicate-object triples the fallback generator reads from `text`.
    struct Triple {
        std::string subject, predicate, object;
    };
    std::vector<Triple> heuristic_triples(const std::string& text) const;
    /// Maximal runs of non-stopword words.
    std::vector<std::string> heuristic_phrases(const std::string& text) const;

private:
    std::string fallback(const CompletionRequest& request) const;

    ProviderConfig config_;
    std::map<std::string, std::string> responses_;  // key: template_id + '\0' + input
    std::set<std::string> predicates_;
    std::set<std::string> stopwords_;
    std::atomic<std::size_t> completion_calls_{0};
    std::atomic<std::size_t> embedding_calls_{0};
};

/// JSON-over-HTTP backend. Requests are serialized through a rate limiter and retried
/// with exponential backoff before surfacing ProviderError.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(ProviderConfig config);

    std::string complete(const CompletionRequest& request) override;
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    std::string kind() const override { return "http"; }
    std::string model() const override { return config_.model; }

private:
    json post(const std::string& path, const json& body);

    ProviderConfig config_;
    std::mutex rate_mutex_;
    std::chrono::steady_clock::time_point last_request_{};
};

/// Disk cache in front of another provider: `<dir>/<digest>.json`, one file per
/// completion or embedded text. `identity` (e.g. a provider_identity digest) is folded
/// into every key so entries from differently configured backends never collide.
class CachingProvider : public Provider {
public:
    CachingProvider(ProviderPtr inner, std::filesystem::path dir, std::string identity = "");

    std::string complete(const CompletionRequest& request) override;
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    std::string kind() const override { return inner_->kind(); }
    std::string model() const override { return inner_->model(); }

    std::string completion_key(const CompletionRequest& request) const;
    std::string embedding_key(const std::string& text) const;

private:
    std::optional<json> lookup(const std::string& key) const;
    void store(const std::string& key, const json& value);

    ProviderPtr inner_;
    std::filesystem::path dir_;
    std::string identity_;
    mutable std::shared_mutex mutex_;
};

ProviderPtr make_provider(const ProviderConfig& config);

/// Renders a template, calls the provider and parses the reply as JSON validated against
/// the template's schema plus `check`. One reprompt on failure, then FormatError.
json complete_structured(Provider& provider, const TemplateStore& templates,
                         const std::string& template_id, const TemplateVars& vars,
                         const std::function<std::optional<std::string>(const json&)>& check = {});

/// Free-text completion through a template.
std::string complete_text(Provider& provider, const TemplateStore& templates,
                          const std::string& template_id, const TemplateVars& vars);

/// Pulls the first JSON value out of a model reply, tolerating code fences and prose.
std::optional<json> extract_json(const std::string& reply);

}  // namespace ontorag
