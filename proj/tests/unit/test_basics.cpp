#include <doctest.h>

#include "ontorag/elements.hpp"
#include "ontorag/errors.hpp"
#include "ontorag/tokenizer.hpp"
#include "ontorag/util.hpp"

#include "../support/oracles.hpp"
#include "../support/paths.hpp"

#include <atomic>
#include <fstream>
#include <random>

using namespace ontorag;

TEST_CASE("sha256 matches the published test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("json digest ignores key order") {
    const json a = json::parse(R"({"b":1,"a":[1,2]})");
    const json b = json::parse(R"({"a":[1,2],"b":1})");
    CHECK(json_digest(a) == json_digest(b));
    CHECK(json_digest(a) != json_digest(json::parse(R"({"a":[2,1],"b":1})")));
}

TEST_CASE("atomic write leaves no temp file behind") {
    const auto dir = testing_paths::scratch_dir("atomic");
    write_file_atomic(dir / "x.json", "first");
    write_file_atomic(dir / "x.json", "second");
    CHECK(read_file(dir / "x.json") == "second");
    CHECK_FALSE(std::filesystem::exists(dir / "x.json.tmp"));
    CHECK(file_digest(dir / "missing") == "");
    std::filesystem::remove_all(dir);
}

TEST_CASE("jsonl parse errors carry the line number") {
    CHECK(parse_jsonl("{\"a\":1}\n\n{\"b\":2}\n").size() == 2);
    try {
        parse_jsonl("{\"a\":1}\n{oops}\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("Rng is reproducible and below() stays in range") {
    Rng a(7), b(7), c(8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs |= x != c.next_u64();
    }
    CHECK(differs);
    for (int i = 0; i < 100; ++i) {
        const double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(a.below(5) < 5);
    }
    std::vector<int> v{1, 2, 3, 4, 5, 6};
    Rng r(3);
    r.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("cosine and normalize") {
    std::vector<double> a{3.0, 4.0};
    normalize(a);
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(norm(a) == doctest::Approx(1.0));
    std::vector<double> zero{0.0, 0.0};
    normalize(zero);
    CHECK(zero == std::vector<double>{0.0, 0.0});
    CHECK(cosine(zero, a) == 0.0);
    CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == doctest::Approx(0.0));
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<std::atomic<int>> hits(200);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                        if (i == 5) throw InvalidArgument("boom");
                    }),
                    InvalidArgument);
}

TEST_CASE("tokenizer counts") {
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("relay trips breaker") == 3);
    CHECK(count_tokens("a,b") == 3);
    CHECK(count_tokens("over-current relay's 1.5 kV a/b") == 5);
    CHECK(count_tokens("end. start") == 3);
    CHECK(count_tokens("(x)") == 3);
    CHECK(token_strings("The Relay, trips.", true, true) == std::vector<std::string>{"the", "relay", "trips"});
}

TEST_CASE("token spans cover the source bytes") {
    const std::string text = "  Relay: trips\tthe breaker.\n";
    for (const auto& t : tokenize(text)) {
        CHECK(t.begin < t.end);
        CHECK(t.end <= text.size());
        for (std::size_t i = t.begin; i < t.end; ++i) CHECK_FALSE(std::isspace(static_cast<unsigned char>(text[i])));
    }
}

TEST_CASE("split_sentences") {
    CHECK(split_sentences("A relay trips. The breaker opens!\nNext line") ==
          std::vector<std::string>{"A relay trips.", "The breaker opens!", "Next line"});
    CHECK(split_sentences("  ").empty());
}

TEST_CASE("transform_coords examples") {
    const BBox b{100, 200, 300, 400};
    CHECK(transform_coords(b, 1000, 720) == BBox{72, 144, 216, 288});
    CHECK(transform_coords(b, 5, 5) == b);
    CHECK(transform_coords(BBox{}, 3, 7) == BBox{});
    CHECK_THROWS_AS(transform_coords(b, 0, 720), InvalidArgument);
    CHECK_THROWS_AS(transform_coords(b, 1000, -1), InvalidArgument);
}

TEST_CASE("pad_region examples") {
    const BBox page{0, 0, 612, 792};
    CHECK(pad_region(BBox{72, 144, 216, 288}, page) == BBox{52, 44, 236, 388});
    CHECK(pad_region(BBox{5, 50, 100, 100}, page) == BBox{0, 0, 120, 200});
    CHECK(pad_region(BBox{5, 50, 100, 100}, page, 0, 0) == BBox{5, 50, 100, 100});
}

TEST_CASE("pad_region stays on the page for random boxes") {
    std::mt19937_64 gen(11);
    const BBox page{0, 0, 612, 792};
    for (int i = 0; i < 200; ++i) {
        const double x0 = oracle::unit(gen) * 612, x1 = x0 + oracle::unit(gen) * (612 - x0);
        const double y0 = oracle::unit(gen) * 792, y1 = y0 + oracle::unit(gen) * (792 - y0);
        CHECK(page.contains(pad_region(BBox{x0, y0, x1, y1}, page)));
    }
}

TEST_CASE("extract_table_region composes scaling and padding") {
    DocumentElement table{"t1", "doc", ElementKind::table, "a | b", 2, BBox{100, 200, 300, 400}, 1000};
    const CropRequest c = extract_table_region(table, 720);
    CHECK(c.padded_bbox == BBox{52, 44, 236, 388});
    CHECK(c.element_id == "t1");
    CHECK(c.page == 2);

    DocumentElement native = table;
    native.units = 720;
    native.bbox = BBox{72, 144, 216, 288};
    CHECK(extract_table_region(native, 720).padded_bbox == BBox{52, 44, 236, 388});

    DocumentElement text = table;
    text.kind = ElementKind::narrative_text;
    CHECK_THROWS_AS(extract_table_region(text, 720), InvalidArgument);
}

TEST_CASE("element files load, normalize and round-trip") {
    CHECK(parse_elements("").empty());
    const std::string two =
        R"({"id":"e1","doc_id":"d","kind":"title","text":"T","page":1,"bbox":{"x0":10,"y0":5,"x1":2,"y1":1},"units":72})"
        "\n"
        R"({"id":"e2","doc_id":"d","kind":"narrative_text","text":"Body","page":1,"bbox":{"x0":0,"y0":0,"x1":1,"y1":1},"units":72})"
        "\n";
    const auto elements = parse_elements(two);
    REQUIRE(elements.size() == 2);
    CHECK(elements[0].id == "e1");
    CHECK(elements[1].id == "e2");
    CHECK(elements[0].bbox == BBox{2, 1, 10, 5});

    const std::string canonical = serialize_elements(elements);
    CHECK(serialize_elements(parse_elements(canonical)) == canonical);

    const auto fixture = load_elements(testing_paths::fixture_dir() / "elements.jsonl");
    CHECK(fixture.size() == 20);
    CHECK(serialize_elements(parse_elements(serialize_elements(fixture))) == serialize_elements(fixture));
}

TEST_CASE("element loader rejects bad records") {
    CHECK_THROWS_AS(parse_elements(R"({"id":"e1","doc_id":"d","kind":"bogus","text":"","page":1,"bbox":{"x0":0,"y0":0,"x1":1,"y1":1},"units":1})"),
                    ParseError);
    const std::string dup =
        R"({"id":"e1","doc_id":"d","kind":"title","text":"","page":1,"bbox":{"x0":0,"y0":0,"x1":1,"y1":1},"units":1})"
        "\n"
        R"({"id":"e1","doc_id":"d","kind":"title","text":"","page":1,"bbox":{"x0":0,"y0":0,"x1":1,"y1":1},"units":1})";
    CHECK_THROWS_WITH_AS(parse_elements(dup), doctest::Contains("duplicate element id"), Error);
}
