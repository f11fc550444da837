#include <doctest.h>

#include "ontorag/errors.hpp"
#include "ontorag/providers.hpp"
#include "ontorag/templates.hpp"

#include "../support/paths.hpp"

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace ontorag;

namespace {

TemplateStore templates() { return TemplateStore(testing_paths::template_dir()); }

/// Counts calls and replays a fixed completion.
class CountingProvider : public Provider {
public:
    explicit CountingProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string complete(const CompletionRequest& r) override {
        last_prompt = r.rendered_prompt;
        const std::size_t i = std::min(calls.load(), replies_.size() - 1);
        ++calls;
        return replies_[i];
    }
    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        embed_calls += texts.size();
        std::vector<Embedding> out;
        for (const auto& t : texts) out.push_back({static_cast<double>(t.size()), 1.0});
        return out;
    }
    std::string kind() const override { return "counting"; }
    std::string model() const override { return "c1"; }

    std::atomic<std::size_t> calls{0};
    std::atomic<std::size_t> embed_calls{0};
    std::string last_prompt;

private:
    std::vector<std::string> replies_;
};

/// Local HTTP backend on an ephemeral port, stopped on destruction.
class LocalServer {
public:
    LocalServer() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }

    httplib::Server server;
    int port = 0;
    std::thread thread;
};

ProviderConfig http_config(const std::string& endpoint) {
    ProviderConfig c;
    c.kind = ProviderKind::http;
    c.endpoint = endpoint;
    c.model = "test-model";
    c.retries = 2;
    c.retry_backoff_seconds = 0.01;
    c.timeout_seconds = 2.0;
    c.auth_env = "ONTORAG_TEST_KEY";
    return c;
}

}  // namespace

TEST_CASE("template store renders placeholders and rejects unknown ones") {
    const TemplateStore store = templates();
    for (const char* id : {"clean_text", "disambiguate", "ner", "extract_facts", "define_term",
                           "synthesize_properties", "name_class", "query_keys", "answer", "answer_refusal",
                           "personas", "tasks", "questions", "extract_claims", "judge_comprehensiveness",
                           "judge_diversity", "judge_empowerment", "judge_directness"}) {
        CHECK_MESSAGE(store.contains(id), id);
    }
    const std::string out = store.render("query_keys", {{"input", "How do relays trip?"}});
    CHECK(out.find("How do relays trip?") != std::string::npos);
    CHECK(out.find("{{") == std::string::npos);
    CHECK_THROWS_AS(store.render("query_keys", {}), InvalidArgument);
    CHECK_THROWS_AS(store.get("nope"), ConfigError);

    TemplateStore other = store;
    PromptTemplate t = store.get("answer");
    t.body += " ";
    other.add(t);
    CHECK(other.digest() != store.digest());
}

TEST_CASE("schema subset validation") {
    const json schema = json::parse(R"({"type":"object","required":["winner"],
        "properties":{"winner":{"enum":["1","2","tie"]}}})");
    CHECK_FALSE(validate_schema(json::parse(R"({"winner":"tie"})"), schema));
    CHECK(validate_schema(json::parse(R"({"winner":"3"})"), schema));
    CHECK(validate_schema(json::parse(R"({})"), schema));
    CHECK(validate_schema(json::parse(R"([])"), schema));
    const json arr = json::parse(R"({"type":"array","items":{"type":"string"},"minItems":1})");
    CHECK_FALSE(validate_schema(json::parse(R"(["a"])"), arr));
    CHECK(validate_schema(json::parse(R"([1])"), arr));
    CHECK(validate_schema(json::parse(R"([])"), arr));
}

TEST_CASE("extract_json tolerates fences and prose") {
    CHECK(*extract_json("[1, 2]") == json::parse("[1,2]"));
    CHECK(*extract_json("```json\n{\"a\": 1}\n```") == json::parse(R"({"a":1})"));
    CHECK(*extract_json("Sure! Here it is: [\"x\"] hope that helps") == json::parse(R"(["x"])"));
    CHECK_FALSE(extract_json("no json here"));
}

TEST_CASE("mock completions are deterministic and fixture driven") {
    MockProvider mock;
    const TemplateStore store = templates();
    const TemplateVars vars{{"input", "The relay trips the breaker."}};
    const std::string a = complete_text(mock, store, "clean_text", vars);
    CHECK(a == complete_text(mock, store, "clean_text", vars));

    mock.add_response("clean_text", "Teh relay trips.", "The relay trips.");
    CHECK(complete_text(mock, store, "clean_text", {{"input", "Teh relay trips."}}) == "The relay trips.");
    mock.add_response("disambiguate", "It trips the breaker", "The relay trips the breaker");
    CHECK(complete_text(mock, store, "disambiguate", {{"input", "It trips the breaker"}}) ==
          "The relay trips the breaker");

    const json facts = json::parse(R"([{"subject":"relay","predicate":"trips","object":"breaker","key_entities":["relay"]}])");
    mock.add_response("extract_facts", "fixture chunk", facts.dump());
    CHECK(complete_structured(mock, store, "extract_facts", {{"input", "fixture chunk"}, {"entities", "[]"}}) == facts);
}

TEST_CASE("mock fallback rules") {
    MockProvider mock;
    const TemplateStore store = templates();
    const json triples = complete_structured(mock, store, "extract_facts",
                                             {{"input", "The relay trips the breaker."}, {"entities", "[]"}});
    REQUIRE(triples.size() == 1);
    CHECK(triples[0]["subject"] == "relay");
    CHECK(triples[0]["predicate"] == "trips");
    CHECK(triples[0]["object"] == "breaker");

    const json verdict = complete_structured(mock, store, "judge_directness",
                                             {{"input", "q"}, {"answer_1", "a b c"}, {"answer_2", "a"}, {"replicate", "1"}});
    CHECK(verdict["winner"] == "1");
    const json tie = complete_structured(mock, store, "judge_directness",
                                         {{"input", "q"}, {"answer_1", "same"}, {"answer_2", "same"}, {"replicate", "1"}});
    CHECK(tie["winner"] == "tie");
}

TEST_CASE("mock embeddings") {
    MockProvider mock;
    const std::vector<std::string> xx{"x", "x"};
    const auto v = mock.embed(xx);
    CHECK(v[0] == v[1]);
    for (const auto& text : {"a b c", "relay trips breaker", "?"}) {
        CHECK(norm(mock.embed_one(text)) == doctest::Approx(1.0).epsilon(1e-6));
    }
    const auto abc = mock.embed_one("a b c");
    CHECK(cosine(abc, mock.embed_one("a b c d")) > cosine(abc, mock.embed_one("q r s")));
    CHECK_THROWS_AS(mock.embed_one("  "), InvalidArgument);
}

TEST_CASE("complete_structured reprompts once, then raises FormatError") {
    const TemplateStore store = templates();
    CountingProvider fixed({"not json", "[\"ok\"]"});
    CHECK(complete_structured(fixed, store, "ner", {{"input", "x"}}) == json::parse(R"(["ok"])"));
    CHECK(fixed.calls == 2);
    CHECK(fixed.last_prompt.find("rejected") != std::string::npos);

    CountingProvider broken({"nope"});
    CHECK_THROWS_AS(complete_structured(broken, store, "ner", {{"input", "x"}}), FormatError);
    CHECK(broken.calls == 2);
}

TEST_CASE("caching provider calls the backend once per distinct request") {
    const auto dir = testing_paths::scratch_dir("cache");
    const TemplateStore store = templates();
    auto inner = std::make_shared<CountingProvider>(std::vector<std::string>{"[\"relay\"]"});
    {
        CachingProvider cache(inner, dir, "id-1");
        CHECK(complete_structured(cache, store, "ner", {{"input", "x"}}) == json::parse(R"(["relay"])"));
        CHECK(complete_structured(cache, store, "ner", {{"input", "x"}}) == json::parse(R"(["relay"])"));
        CHECK(inner->calls == 1);
        const std::vector<std::string> texts{"a", "bb", "a"};
        cache.embed(texts);
        cache.embed(texts);
        CHECK(inner->embed_calls == 2);
    }
    // A fresh instance on the same directory reuses the entries.
    CachingProvider again(inner, dir, "id-1");
    complete_structured(again, store, "ner", {{"input", "x"}});
    CHECK(inner->calls == 1);
    // A different identity never sees them.
    CachingProvider other(inner, dir, "id-2");
    complete_structured(other, store, "ner", {{"input", "x"}});
    CHECK(inner->calls == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("http provider talks JSON and sends the key only as a header") {
    LocalServer srv;
    std::atomic<int> failures_left{1};
    std::string seen_auth;
    srv.server.Post("/v1/complete", [&](const httplib::Request& req, httplib::Response& res) {
        if (failures_left-- > 0) {
            res.status = 503;
            return;
        }
        seen_auth = req.get_header_value("Authorization");
        const json body = json::parse(req.body);
        res.set_content(json{{"text", "echo: " + body["prompt"].get<std::string>()}}.dump(), "application/json");
    });
    srv.server.Post("/v1/embed", [&](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body);
        json vectors = json::array();
        for (std::size_t i = 0; i < body["inputs"].size(); ++i) vectors.push_back({3.0, 4.0});
        res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });

    ::setenv("ONTORAG_TEST_KEY", "sk-test-secret", 1);
    HttpProvider http(http_config(srv.endpoint()));
    CompletionRequest r;
    r.template_id = "t";
    r.rendered_prompt = "hello";
    CHECK(http.complete(r) == "echo: hello");
    CHECK(seen_auth == "Bearer sk-test-secret");

    const std::vector<std::string> texts{"a", "b"};
    const auto v = http.embed(texts);
    REQUIRE(v.size() == 2);
    CHECK(v[0][0] == doctest::Approx(0.6));
    ::unsetenv("ONTORAG_TEST_KEY");
}

TEST_CASE("http provider surfaces errors without leaking the key") {
    ::setenv("ONTORAG_TEST_KEY", "sk-test-secret", 1);
    {
        LocalServer srv;
        srv.server.Post("/v1/complete", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
        HttpProvider http(http_config(srv.endpoint()));
        try {
            http.complete(CompletionRequest{"t", "p", {}, 0.0, 16});
            FAIL("expected ProviderError");
        } catch (const ProviderError& e) {
            const std::string what = e.what();
            CHECK(what.find("3 attempts") != std::string::npos);
            CHECK(what.find("sk-test-secret") == std::string::npos);
        }
    }
    {
        // Port 9 on loopback: nothing listens there.
        ProviderConfig c = http_config("http://127.0.0.1:9");
        c.timeout_seconds = 0.5;
        HttpProvider http(c);
        CHECK_THROWS_AS(http.complete(CompletionRequest{"t", "p", {}, 0.0, 16}), ProviderError);
    }
    ::unsetenv("ONTORAG_TEST_KEY");
}

TEST_CASE("provider config validation and identity") {
    ProviderConfig c = http_config("");
    CHECK_THROWS_AS(c.validate(), ConfigError);
    const json j = json::parse(R"({"kind":"http","endpoint":"http://x","auth_env":"MY_KEY"})");
    const ProviderConfig parsed = provider_config_from_json(j);
    CHECK(parsed.auth_env == "MY_KEY");
    const std::string identity = provider_identity(parsed).dump();
    CHECK(identity.find("MY_KEY") == std::string::npos);
    CHECK_THROWS_AS(provider_config_from_json(json::parse(R"({"kind":"carrier-pigeon"})")), ConfigError);
}
