#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ontorag/chunker.hpp"
#include "ontorag/elements.hpp"
#include "ontorag/errors.hpp"
#include "ontorag/evalkit.hpp"
#include "ontorag/extract.hpp"
#include "ontorag/kgraph.hpp"
#include "ontorag/ontology.hpp"
#include "ontorag/providers.hpp"
#include "ontorag/retrieve.hpp"

namespace ontorag {

struct EvalConfig {
    std::string description;
    /// Curated questions file; when set, generate-questions copies it instead of prompting.
    std::filesystem::path questions_file;
    QuestionPlan plan;
    std::vector<std::string> conditions{"O0", "O2", "SS"};
    std::vector<Metric> metrics = all_metrics();
    std::size_t replicates = 5;
    double cluster_threshold = 0.5;
    std::size_t baseline_top_k = 5;
};

struct PipelineConfig {
    std::filesystem::path config_dir;
    std::filesystem::path workdir;
    std::filesystem::path corpus;
    std::filesystem::path templates;  ///< empty: built-in template directory
    std::uint64_t seed = 42;

    ProviderConfig provider;
    bool cache = true;

    double target_units = 72.0;
    PageBoundsTable page_bounds;

    ChunkingConfig chunking;
    /// "hybrid" (title boundaries) or "fixed" (max_tokens windows without overlap).
    std::string chunk_mode = "hybrid";
    bool semantic_merge = true;
    std::vector<double> sweep;
    std::size_t baseline_size_tokens = 600;
    std::size_t baseline_overlap_tokens = 100;

    ExtractConfig extract;
    GraphBuildConfig graph;
    OntologyConfig ontology;
    RetrievalConfig retrieval;
    EvalConfig eval;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Replaces ${NAME} in every string with the environment value; unset names are errors.
json interpolate_env(const json& value, const std::string& path = "");

/// Reads the config file. Relative paths resolve against the file's directory; `workdir`
/// and `seed` override the file when given.
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::optional<std::filesystem::path>& workdir = std::nullopt,
                           const std::optional<std::uint64_t>& seed = std::nullopt);
PipelineConfig config_from_json(const json& j, const std::filesystem::path& config_dir);

enum class Stage { ingest, chunk, extract, build_graph, build_ontology, index_baseline };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);
std::vector<Stage> all_stages();

struct StageRecord {
    std::map<std::string, std::string> inputs;   ///< file name -> digest
    std::map<std::string, std::string> outputs;  ///< file name -> digest
    std::string config_digest;
    std::string started_at;
    std::string finished_at;
    double duration_ms = 0.0;
};

struct StageManifest {
    std::map<std::string, StageRecord> stages;

    static StageManifest load(const std::filesystem::path& workdir);
    void save(const std::filesystem::path& workdir) const;
};

json to_json(const StageManifest& m);
StageManifest manifest_from_json(const json& j);

/// JSON-lines records on stderr.
class Logger {
public:
    explicit Logger(bool enabled = true) : enabled_(enabled) {}
    void log(const std::string& event, const json& fields = json::object()) const;

private:
    bool enabled_;
};

/// Exclusive per-workdir lock held for the object's lifetime.
class WorkdirLock {
public:
    explicit WorkdirLock(const std::filesystem::path& workdir);
    ~WorkdirLock();
    WorkdirLock(const WorkdirLock&) = delete;
    WorkdirLock& operator=(const WorkdirLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Thrown when a stage cannot complete; the manifest keeps its previous record.
class StageError : public Error {
public:
    StageError(Stage stage, const std::string& what);
    Stage stage() const { return stage_; }

private:
    Stage stage_;
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig config, Logger logger = Logger());

    const PipelineConfig& config() const { return config_; }
    Provider& provider();
    const TemplateStore& templates() const { return templates_; }

    /// Runs the requested stages in pipeline order, skipping fresh ones.
    StageManifest run(const std::vector<Stage>& stages);
    bool is_fresh(Stage stage, const StageManifest& manifest) const;
    std::string stage_config_digest(Stage stage) const;

    QueryResult query(const std::string& question, const RetrievalConfig& retrieval);

    std::vector<Question> generate_questions();
    /// Writes answers/<condition>/<qid>.json for every question.
    void run_conditions(const std::vector<std::string>& conditions);
    /// Judges every pair of answered conditions; writes verdicts.jsonl.
    std::vector<JudgeVerdict> judge(const std::vector<Metric>& metrics, std::size_t replicates);
    /// Claims, clusters and win rates; writes report.json.
    json report();

private:
    std::filesystem::path path(const std::string& name) const;
    void run_stage(Stage stage);
    std::vector<std::string> stage_inputs(Stage stage) const;
    std::vector<std::string> stage_outputs(Stage stage) const;
    json stage_config(Stage stage) const;
    std::vector<std::string> answered_conditions() const;

    PipelineConfig config_;
    Logger logger_;
    TemplateStore templates_;
    ProviderPtr provider_;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Cross-file referential integrity of a workdir.
ValidationReport validate_artifacts(const std::filesystem::path& workdir);

}  // namespace ontorag
