#include "ontorag/errors.hpp"
#include "ontorag/providers.hpp"

#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace ontorag {

HttpProvider::HttpProvider(ProviderConfig config) : config_(std::move(config)) {
    config_.validate();
}

json HttpProvider::post(const std::string& path, const json& body) {
    httplib::Client client(config_.endpoint);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.auth_env.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            const double wait = config_.retry_backoff_seconds * static_cast<double>(1 << (attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
        if (config_.requests_per_second > 0.0) {
            std::lock_guard lock(rate_mutex_);
            const auto min_gap = std::chrono::duration<double>(1.0 / config_.requests_per_second);
            const auto next = last_request_ +
                              std::chrono::duration_cast<std::chrono::steady_clock::duration>(min_gap);
            if (std::chrono::steady_clock::now() < next) {
                std::this_thread::sleep_until(next);
            }
            last_request_ = std::chrono::steady_clock::now();
        }
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw ProviderError(path + ": HTTP " + std::to_string(res->status));
        }
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw FormatError(path + ": response is not JSON: " + e.what());
        }
    }
    throw ProviderError(config_.endpoint + path + ": giving up after " +
                        std::to_string(config_.retries + 1) + " attempts (" + last_error + ")");
}

std::string HttpProvider::complete(const CompletionRequest& request) {
    json body{{"model", config_.model},
              {config_.prompt_field, request.rendered_prompt},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens}};
    const json res = post(config_.completion_path, body);
    if (!res.contains(config_.text_field) || !res[config_.text_field].is_string()) {
        throw FormatError("completion response lacks string field '" + config_.text_field + "'");
    }
    return res[config_.text_field].get<std::string>();
}

std::vector<Embedding> HttpProvider::embed(std::span<const std::string> texts) {
    for (const auto& t : texts) {
        if (t.empty()) throw InvalidArgument("cannot embed an empty string");
    }
    json body{{"model", config_.model},
              {config_.inputs_field, std::vector<std::string>(texts.begin(), texts.end())}};
    const json res = post(config_.embedding_path, body);
    if (!res.contains(config_.vectors_field) || !res[config_.vectors_field].is_array()) {
        throw FormatError("embedding response lacks array field '" + config_.vectors_field + "'");
    }
    std::vector<Embedding> out;
    try {
        out = res[config_.vectors_field].get<std::vector<Embedding>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("embedding vectors malformed: ") + e.what());
    }
    if (out.size() != texts.size()) {
        throw FormatError("embedding response has " + std::to_string(out.size()) +
                          " vectors for " + std::to_string(texts.size()) + " inputs");
    }
    for (auto& v : out) {
        if (norm(v) == 0.0) throw FormatError("embedding backend returned a zero vector");
        normalize(v);
    }
    return out;
}

}  // namespace ontorag
