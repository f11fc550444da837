#include <doctest.h>

#include "ontorag/errors.hpp"
#include "ontorag/pipeline.hpp"

#include "../support/paths.hpp"

#include <cstdlib>
#include <fstream>

using namespace ontorag;
namespace fs = std::filesystem;

namespace {

PipelineConfig fixture_config(const fs::path& workdir) {
    return load_config(testing_paths::fixture_dir() / "config.json", workdir);
}

std::map<std::string, std::string> stage_times(const StageManifest& m) {
    std::map<std::string, std::string> out;
    for (const auto& [name, rec] : m.stages) out[name] = rec.finished_at + "|" + rec.config_digest;
    return out;
}

/// Every file under `dir` except the manifest and the provider cache, by relative path.
std::map<std::string, std::string> artifact_bytes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), dir).string();
        if (rel == "manifest.json" || rel.rfind("cache/", 0) == 0) continue;
        out[rel] = read_file(e.path());
    }
    return out;
}

}  // namespace

TEST_CASE("config loading resolves paths and names bad fields") {
    const PipelineConfig c = fixture_config("/tmp/x");
    CHECK(c.workdir == "/tmp/x");
    CHECK(c.corpus == testing_paths::fixture_dir() / "elements.jsonl");
    CHECK(c.seed == 42);
    CHECK(c.ontology.max_depth == 3);

    json j = json::parse(read_file(testing_paths::fixture_dir() / "config.json"));
    j["chunking"]["min_tokens"] = 500;
    j["chunking"]["max_tokens"] = 100;
    CHECK_THROWS_WITH_AS(config_from_json(j, testing_paths::fixture_dir()).validate(),
                         doctest::Contains("chunking"), ConfigError);

    j = json::parse(read_file(testing_paths::fixture_dir() / "config.json"));
    j["corpus"] = "missing.jsonl";
    CHECK_THROWS_WITH_AS(config_from_json(j, testing_paths::fixture_dir()).validate(),
                         doctest::Contains("corpus"), ConfigError);

    j = json::parse(read_file(testing_paths::fixture_dir() / "config.json"));
    j["extract"]["confidence_threshold"] = 2.0;
    CHECK_THROWS_WITH_AS(config_from_json(j, testing_paths::fixture_dir()).validate(),
                         doctest::Contains("extract.confidence_threshold"), ConfigError);

    const PipelineConfig seeded = load_config(testing_paths::fixture_dir() / "config.json", "/tmp/x", 7);
    CHECK(seeded.seed == 7);
    CHECK(seeded.ontology.seed == 7);
}

TEST_CASE("environment interpolation") {
    ::setenv("ONTORAG_TEST_ENDPOINT", "http://example.invalid", 1);
    const json in = json::parse(R"({"provider":{"endpoint":"${ONTORAG_TEST_ENDPOINT}/v1","n":3}})");
    const json out = interpolate_env(in);
    CHECK(out["provider"]["endpoint"] == "http://example.invalid/v1");
    CHECK(out["provider"]["n"] == 3);
    ::unsetenv("ONTORAG_TEST_ENDPOINT");
    CHECK_THROWS_WITH_AS(interpolate_env(in), doctest::Contains("provider.endpoint"), ConfigError);
}

TEST_CASE("stage names") {
    for (Stage s : all_stages()) CHECK(stage_from_string(to_string(s)) == s);
    CHECK(to_string(Stage::build_graph) == "build-graph");
    CHECK_THROWS(stage_from_string("teleport"));
}

TEST_CASE("workdir lock is exclusive and released") {
    const fs::path dir = testing_paths::scratch_dir("lock");
    {
        WorkdirLock lock(dir);
        CHECK(fs::exists(dir / ".lock"));
        CHECK_THROWS_AS(WorkdirLock{dir}, Error);
    }
    CHECK_FALSE(fs::exists(dir / ".lock"));
    // A lock left by a process that no longer exists is taken over.
    std::ofstream(dir / ".lock") << "999999999\n";
    { WorkdirLock lock(dir); }
    fs::remove_all(dir);
}

TEST_CASE("full run, freshness, and digest propagation") {
    const fs::path dir = testing_paths::scratch_dir("pipeline");
    Pipeline p(fixture_config(dir), Logger(false));
    const StageManifest first = p.run(all_stages());
    for (const char* name : {"elements.jsonl", "chunks.jsonl", "chunkgraphs.jsonl", "keyelements.jsonl",
                             "canonmap.json", "kg.json", "ontology.json", "index.json", "manifest.json"}) {
        CHECK_MESSAGE(fs::exists(dir / name), name);
    }
    CHECK(fs::is_directory(dir / "cache"));
    CHECK_FALSE(fs::exists(dir / ".lock"));
    for (Stage s : all_stages()) CHECK(p.is_fresh(s, first));
    CHECK(validate_artifacts(dir).ok());

    // Rerun: every stage is skipped, so the records are untouched.
    const StageManifest second = p.run(all_stages());
    CHECK(stage_times(second) == stage_times(first));

    // A new theta_name reruns build-graph and everything downstream of it only.
    PipelineConfig changed = fixture_config(dir);
    changed.graph.thresholds.theta_name = 0.95;
    Pipeline q(changed, Logger(false));
    for (Stage s : {Stage::ingest, Stage::chunk, Stage::extract, Stage::index_baseline}) CHECK(q.is_fresh(s, first));
    CHECK_FALSE(q.is_fresh(Stage::build_graph, first));
    CHECK_FALSE(q.is_fresh(Stage::build_ontology, first));
    const StageManifest third = q.run(all_stages());
    const auto before = stage_times(first), after = stage_times(third);
    for (const char* s : {"ingest", "chunk", "extract", "index-baseline"}) CHECK(after.at(s) == before.at(s));
    for (const char* s : {"build-graph", "build-ontology"}) CHECK(after.at(s) != before.at(s));

    // Editing an output makes its stage stale.
    std::ofstream(dir / "kg.json", std::ios::app) << " ";
    CHECK_FALSE(q.is_fresh(Stage::build_graph, StageManifest::load(dir)));
    fs::remove_all(dir);
}

TEST_CASE("validate_artifacts findings") {
    const fs::path dir = testing_paths::scratch_dir("validate");
    Pipeline p(fixture_config(dir), Logger(false));
    p.run(all_stages());
    REQUIRE(validate_artifacts(dir).ok());

    // A class naming a key element that does not exist.
    json kg = json::parse(read_file(dir / "kg.json"));
    const std::string kg_original = kg.dump();
    kg["classes"][0]["member_ids"].push_back("K999999");
    write_file_atomic(dir / "kg.json", kg.dump());
    const ValidationReport absent = validate_artifacts(dir);
    CHECK_FALSE(absent.ok());
    bool names_member = false;
    for (const auto& v : absent.violations) names_member |= v.find("K999999") != std::string::npos;
    CHECK(names_member);

    fs::remove(dir / "keyelements.jsonl");
    const ValidationReport missing = validate_artifacts(dir);
    bool names_file = false;
    for (const auto& v : missing.violations) names_file |= v.find("missing keyelements.jsonl") != std::string::npos;
    CHECK(names_file);

    CHECK_FALSE(validate_artifacts(dir / "nowhere").ok());
    fs::remove_all(dir);
}

TEST_CASE("a failing stage leaves its manifest record alone") {
    const fs::path dir = testing_paths::scratch_dir("failing");
    PipelineConfig c = fixture_config(dir);
    Pipeline p(c, Logger(false));
    p.run({Stage::ingest, Stage::chunk});
    const StageManifest before = StageManifest::load(dir);
    fs::remove(dir / "elements.jsonl");
    std::ofstream(dir / "elements.jsonl") << "{not json\n";
    CHECK_THROWS_AS(p.run({Stage::chunk}), StageError);
    CHECK(stage_times(StageManifest::load(dir)) == stage_times(before));
    fs::remove_all(dir);
}

TEST_CASE("evaluation writes answers, verdicts and a report") {
    const fs::path dir = testing_paths::scratch_dir("eval");
    Pipeline p(fixture_config(dir), Logger(false));
    p.run(all_stages());
    const auto questions = p.generate_questions();
    CHECK(questions.size() == 5);
    p.run_conditions({"O0", "SS"});
    CHECK(fs::exists(dir / "answers" / "O0" / "q000.json"));
    CHECK(fs::exists(dir / "answers" / "SS" / "q004.json"));
    const auto verdicts = p.judge({Metric::comprehensiveness}, 3);
    CHECK(verdicts.size() == 5 * 3);
    const json r = p.report();
    CHECK(fs::exists(dir / "report.json"));
    const json rates = r.at("win_rates");
    CHECK_FALSE(rates.empty());
    fs::remove_all(dir);
}

TEST_CASE("two runs with the same seed produce identical artifacts") {
    std::vector<std::map<std::string, std::string>> runs;
    for (const char* tag : {"det-a", "det-b"}) {
        const fs::path dir = testing_paths::scratch_dir(tag);
        Pipeline p(fixture_config(dir), Logger(false));
        p.run(all_stages());
        p.generate_questions();
        p.run_conditions(p.config().eval.conditions);
        p.judge(p.config().eval.metrics, p.config().eval.replicates);
        p.report();
        runs.push_back(artifact_bytes(dir));
        fs::remove_all(dir);
    }
    CHECK(runs[0].size() > 10);
    CHECK(runs[0] == runs[1]);
}
