#include <doctest.h>

#include "ontorag/errors.hpp"
#include "ontorag/evalkit.hpp"

#include "../support/oracles.hpp"
#include "../support/paths.hpp"

#include <random>

using namespace ontorag;

namespace {

TemplateStore templates() { return TemplateStore(testing_paths::template_dir()); }

JudgeVerdict verdict(const std::string& a, const std::string& b, Winner w, std::size_t replicate = 0) {
    JudgeVerdict v;
    v.question_id = "q000";
    v.condition_a = a;
    v.condition_b = b;
    v.metric = Metric::comprehensiveness;
    v.replicate = replicate;
    v.winner = w;
    return v;
}

std::string random_words(std::mt19937_64& gen, std::size_t max_len) {
    static const char* vocab[] = {"relay", "trips", "breaker", "current", "fault", "coil", "a", "b"};
    std::string out;
    const std::size_t n = oracle::below(gen, max_len + 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += vocab[oracle::below(gen, 8)];
    }
    return out;
}

std::vector<std::vector<std::size_t>> sorted_clusters(const ClusterSet& s) {
    auto c = s.clusters;
    std::sort(c.begin(), c.end());
    return c;
}

}  // namespace

TEST_CASE("rouge-l examples") {
    CHECK(rouge_l_distance("a b c", "a c") == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(rouge_l_distance("relay trips", "relay trips") == 0.0);
    CHECK(rouge_l_distance("relay trips", "breaker opens") == 1.0);
    CHECK(rouge_l_distance("", "") == 0.0);
    CHECK(rouge_l_distance("", "x") == 1.0);
    CHECK(rouge_l_distance("The Relay, trips.", "the relay trips") == 0.0);
    const std::vector<std::string> a{"a", "b", "c"}, b{"a", "c"};
    CHECK(lcs_length(a, b) == 2);
}

TEST_CASE("rouge-l matches the table oracle and is symmetric") {
    std::mt19937_64 gen(71);
    for (int i = 0; i < 300; ++i) {
        const std::string a = random_words(gen, 12), b = random_words(gen, 12);
        CHECK(std::abs(rouge_l_distance(a, b) - oracle::rouge_l_distance(a, b)) < 1e-12);
        CHECK(rouge_l_distance(a, b) == doctest::Approx(rouge_l_distance(b, a)).epsilon(1e-15));
        CHECK(rouge_l_distance(a, a) == 0.0);
    }
}

TEST_CASE("cluster_claims extremes") {
    const std::vector<std::string> same(4, "the relay trips");
    CHECK(cluster_claims(same).clusters.size() == 1);
    const std::vector<std::string> apart{"relay", "breaker", "fault"};
    const ClusterSet s = cluster_claims(apart, 0.5);
    CHECK(s.clusters == std::vector<std::vector<std::size_t>>{{0}, {1}, {2}});
    CHECK(cluster_claims({}, 0.5).clusters.empty());
    CHECK_THROWS_AS(cluster_claims(apart, 1.5), InvalidArgument);
}

TEST_CASE("average linkage matches the brute-force trace") {
    std::mt19937_64 gen(73);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + oracle::below(gen, 8);
        // Sixteenths keep every sum exact, so ties are real ties in both implementations.
        std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = static_cast<double>(oracle::below(gen, 17)) / 16.0;
        }
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) labels.push_back(std::string(1, static_cast<char>('a' + oracle::below(gen, 4))));
        const double threshold = static_cast<double>(oracle::below(gen, 17)) / 16.0;
        CHECK(sorted_clusters(cluster_by_distance(d, labels, threshold)) == oracle::average_linkage(d, labels, threshold));
    }
}

TEST_CASE("claim clusters partition and shrink with the threshold") {
    std::mt19937_64 gen(79);
    std::vector<std::string> claims;
    for (int i = 0; i < 30; ++i) claims.push_back(random_words(gen, 6));
    std::size_t previous = claims.size() + 1;
    for (int t = 0; t <= 10; ++t) {
        const ClusterSet s = cluster_claims(claims, t / 10.0);
        std::vector<std::size_t> all;
        for (const auto& c : s.clusters) all.insert(all.end(), c.begin(), c.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expected(claims.size());
        for (std::size_t i = 0; i < expected.size(); ++i) expected[i] = i;
        CHECK(all == expected);
        CHECK(s.clusters.size() <= previous);
        previous = s.clusters.size();
    }
}

TEST_CASE("win rate arithmetic") {
    std::vector<JudgeVerdict> all_a, ties, mixed;
    for (std::size_t i = 0; i < 10; ++i) {
        all_a.push_back(verdict("A", "B", Winner::a, i));
        ties.push_back(verdict("A", "B", Winner::tie, i));
        mixed.push_back(verdict("A", "B", i < 6 ? Winner::a : Winner::b, i));
    }
    const auto key = std::tuple{std::string("A"), std::string("B"), Metric::comprehensiveness};
    const auto rev = std::tuple{std::string("B"), std::string("A"), Metric::comprehensiveness};
    CHECK(win_rates(all_a).at(key) == doctest::Approx(100.0));
    CHECK(win_rates(all_a).at(rev) == doctest::Approx(0.0));
    CHECK(win_rates(ties).at(key) == doctest::Approx(50.0));
    CHECK(win_rates(mixed).at(key) == doctest::Approx(60.0));
    CHECK(win_rates(mixed).at(rev) == doctest::Approx(40.0));

    // Verdicts recorded in the other orientation pool with these.
    mixed.push_back(verdict("B", "A", Winner::a));
    const auto t = win_rates(mixed);
    CHECK(t.at(key) + t.at(rev) == doctest::Approx(100.0));
    CHECK(t.at(rev) == doctest::Approx(100.0 * 5 / 11));
}

TEST_CASE("judge replicates under the mock") {
    MockProvider mock;
    const TemplateStore store = templates();
    const JudgeRequest req{"q000", "What trips?", "O0", "The relay trips the breaker on overcurrent.", "SS",
                           "The relay."};
    const auto v = judge_pairwise(mock, store, req, Metric::comprehensiveness, 5, 42);
    REQUIRE(v.size() == 5);
    bool swapped = false, straight = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v[i].replicate == i);
        CHECK(v[i].winner == Winner::a);
        (v[i].swapped ? swapped : straight) = true;
    }
    CHECK(swapped);
    CHECK(straight);
    const auto again = judge_pairwise(mock, store, req, Metric::comprehensiveness, 5, 42);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(to_json(again[i]) == to_json(v[i]));

    JudgeRequest same = req;
    same.answer_b = same.answer_a;
    for (const auto& x : judge_pairwise(mock, store, same, Metric::directness, 3, 1)) CHECK(x.winner == Winner::tie);
}

TEST_CASE("question generation follows the plan") {
    MockProvider mock;
    const TemplateStore store = templates();
    const auto qs = generate_questions(mock, store, "Relay protection documents.", QuestionPlan{5, 5, 5});
    REQUIRE(qs.size() == 125);
    CHECK(qs[0].id == "q000");
    CHECK(qs[124].id == "q124");
    std::set<std::string> texts;
    for (const auto& q : qs) {
        CHECK_FALSE(q.text.empty());
        texts.insert(q.text);
    }
    CHECK(texts.size() == 125);
    CHECK(generate_questions(mock, store, "Relay protection documents.", QuestionPlan{1, 1, 1}).size() == 1);
    const auto again = generate_questions(mock, store, "Relay protection documents.", QuestionPlan{5, 5, 5});
    CHECK(to_json(again[77]) == to_json(qs[77]));
    CHECK(question_from_json(to_json(qs[3])).text == qs[3].text);
}

TEST_CASE("claim extraction") {
    MockProvider mock;
    const TemplateStore store = templates();
    CHECK(extract_claims(mock, store, "x", "").claims.empty());
    mock.add_response("extract_claims", "Relays trip.", R"(["Relays trip.", "Relays trip.", "Breakers open."])");
    CHECK(extract_claims(mock, store, "x", "Relays trip.").claims ==
          std::vector<std::string>{"Relays trip.", "Breakers open."});
}

TEST_CASE("enum names round-trip") {
    for (Metric m : all_metrics()) CHECK(metric_from_string(to_string(m)) == m);
    for (Winner w : {Winner::a, Winner::b, Winner::tie}) CHECK(winner_from_string(to_string(w)) == w);
    CHECK_THROWS(metric_from_string("beauty"));
}
