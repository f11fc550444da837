#include <doctest.h>

#include "ontorag/chunker.hpp"
#include "ontorag/errors.hpp"
#include "ontorag/tokenizer.hpp"

#include "../support/oracles.hpp"

#include <random>

using namespace ontorag;

namespace {

std::string words(std::size_t n, const std::string& w = "word") {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += w;
    }
    return out;
}

DocumentElement element(const std::string& id, ElementKind kind, std::string text, const std::string& doc = "d") {
    return DocumentElement{id, doc, kind, std::move(text), 1, BBox{0, 0, 1, 1}, 72};
}

ChunkingConfig limits(std::size_t min, std::size_t max) {
    ChunkingConfig c;
    c.min_tokens = min;
    c.max_tokens = max;
    return c;
}

Chunk chunk(const std::string& id, const std::string& text, const std::string& doc = "d") {
    Chunk c;
    c.id = id;
    c.doc_id = doc;
    c.text = text;
    c.token_count = count_tokens(text);
    c.element_ids = {id};
    return c;
}

}  // namespace

TEST_CASE("hybrid_chunk splits at a title once min_tokens is reached") {
    const std::vector<DocumentElement> els{element("a", ElementKind::title, "Title A"),
                                           element("b", ElementKind::narrative_text, words(500)),
                                           element("c", ElementKind::title, "Title B"),
                                           element("d", ElementKind::narrative_text, words(300))};
    const auto chunks = hybrid_chunk(els, limits(200, 1000));
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].element_ids == std::vector<std::string>{"a", "b"});
    CHECK(chunks[1].element_ids == std::vector<std::string>{"c", "d"});
    CHECK(chunks[0].id == "d:c0000");
    CHECK(chunks[1].seq == 1);
}

TEST_CASE("hybrid_chunk ignores a title below min_tokens") {
    const std::vector<DocumentElement> els{element("a", ElementKind::title, "Title A"),
                                           element("b", ElementKind::narrative_text, words(50)),
                                           element("c", ElementKind::title, "Title B"),
                                           element("d", ElementKind::narrative_text, words(300))};
    const auto chunks = hybrid_chunk(els, limits(200, 1000));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].token_count == 2 + 50 + 2 + 300);
}

TEST_CASE("an oversize single element becomes its own chunk") {
    const std::vector<DocumentElement> els{element("a", ElementKind::narrative_text, words(1500))};
    const auto chunks = hybrid_chunk(els, limits(200, 1000));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].token_count == 1500);
}

TEST_CASE("documents never share a chunk") {
    const std::vector<DocumentElement> els{element("a", ElementKind::narrative_text, words(5), "x"),
                                           element("a", ElementKind::narrative_text, words(5), "y")};
    const auto chunks = hybrid_chunk(els, limits(200, 1000));
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].doc_id == "x");
    CHECK(chunks[1].doc_id == "y");
    CHECK(chunks[1].id == "y:c0000");
}

TEST_CASE("chunking config is validated") {
    CHECK_THROWS(hybrid_chunk({}, limits(500, 100)));
    CHECK(hybrid_chunk({}, limits(1, 2)).empty());
}

TEST_CASE("hybrid_chunk partitions random element streams") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<DocumentElement> els;
        const std::size_t n = 1 + oracle::below(gen, 30);
        for (std::size_t i = 0; i < n; ++i) {
            const bool title = oracle::below(gen, 4) == 0;
            const std::size_t len = title ? 1 + oracle::below(gen, 5) : oracle::below(gen, 150);
            els.push_back(element("e" + std::to_string(i), title ? ElementKind::title : ElementKind::narrative_text,
                                  words(len), "doc" + std::to_string(i / 10)));
        }
        const ChunkingConfig cfg = limits(20 + oracle::below(gen, 40), 100 + oracle::below(gen, 60));
        const auto chunks = hybrid_chunk(els, cfg);
        std::vector<std::string> seen;
        for (const auto& c : chunks) {
            for (const auto& id : c.element_ids) seen.push_back(c.doc_id + "/" + id);
            if (c.element_ids.size() > 1) CHECK(c.token_count <= cfg.max_tokens);
        }
        std::vector<std::string> expected;
        for (const auto& e : els) expected.push_back(e.doc_id + "/" + e.id);
        CHECK(seen == expected);
    }
}

TEST_CASE("combine_neighbors") {
    const std::vector<Chunk> cs{chunk("1", "a"), chunk("2", "b"), chunk("3", "c")};
    CHECK(combine_neighbors(cs, 1) == std::vector<std::string>{"a b", "a b c", "b c"});
    CHECK(combine_neighbors(std::span(cs).first(1), 1) == std::vector<std::string>{"a"});
    CHECK(combine_neighbors({}, 1).empty());
}

TEST_CASE("semantic_merge extremes") {
    const std::vector<Chunk> cs{chunk("1", "a"), chunk("2", "b"), chunk("3", "c")};
    const std::vector<std::vector<double>> same(3, {1.0, 0.0, 0.0});
    const auto all = semantic_merge(cs, same, 0.9);
    REQUIRE(all.size() == 1);
    CHECK(all[0].element_ids == std::vector<std::string>{"1", "2", "3"});
    CHECK(all[0].token_count == 3);

    const std::vector<std::vector<double>> ortho{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    CHECK(semantic_merge(cs, ortho, 0.5).size() == 3);

    // The cap refuses merges that would pass max_tokens.
    CHECK(semantic_merge(cs, same, 0.9, 2).size() == 2);
}

TEST_CASE("semantic_merge never merges across documents") {
    const std::vector<Chunk> cs{chunk("1", "a", "x"), chunk("2", "b", "y")};
    const std::vector<std::vector<double>> same(2, {1.0, 0.0});
    CHECK(semantic_merge(cs, same, 0.1).size() == 2);
}

TEST_CASE("threshold sweep rows match semantic_merge and are monotone") {
    std::mt19937_64 gen(9);
    std::vector<Chunk> cs;
    std::vector<std::vector<double>> emb;
    for (int i = 0; i < 40; ++i) {
        cs.push_back(chunk("c" + std::to_string(i), words(1 + oracle::below(gen, 80))));
        std::vector<double> v{1.0, oracle::unit(gen), oracle::unit(gen)};
        normalize(v);
        emb.push_back(v);
    }
    const std::vector<double> thresholds{0.0, 0.5, 0.8, 0.9, 0.95, 1.0};
    const SweepReport r = threshold_sweep(cs, emb, thresholds);
    REQUIRE(r.rows.size() == thresholds.size());
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        CHECK(r.rows[i].chunk_count == semantic_merge(cs, emb, thresholds[i]).size());
        if (i > 0) CHECK(r.rows[i].chunk_count >= r.rows[i - 1].chunk_count);
    }
    CHECK(threshold_sweep(cs, emb, {}).rows.empty());
    CHECK(threshold_sweep(cs, emb, std::vector<double>{0.7}).rows.size() == 1);
}

TEST_CASE("fixed_chunk window arithmetic") {
    const std::string text = words(1100);
    const auto cs = fixed_chunk(text, 600, 100, "doc");
    REQUIRE(cs.size() == 2);
    CHECK(cs[0].token_count == 600);
    CHECK(cs[1].token_count == 600);
    // The second window starts at token 500.
    const auto tokens = tokenize(text);
    CHECK(cs[1].text == text.substr(tokens[500].begin, tokens[1099].end - tokens[500].begin));
    CHECK(cs[0].id == "doc:f0000");
    CHECK(fixed_chunk(words(600), 600, 100).size() == 1);
    CHECK(fixed_chunk("", 600, 100).empty());
    CHECK_THROWS_AS(fixed_chunk("a", 100, 100), InvalidArgument);
}

TEST_CASE("chunks round-trip through jsonl") {
    const std::vector<Chunk> cs{chunk("d:c0000", "Relay trips."), chunk("d:c0001", "Breaker opens.")};
    const std::string text = serialize_chunks(cs);
    const auto back = parse_jsonl(text);
    REQUIRE(back.size() == 2);
    CHECK(chunk_from_json(back[1]).text == "Breaker opens.");
    CHECK(to_json(chunk_from_json(back[0])) == to_json(cs[0]));
}
