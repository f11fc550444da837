#include "ontorag/pipeline.hpp"

#include "ontorag/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <regex>

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace ontorag {

namespace {

constexpr const char* kElements = "elements.jsonl";
constexpr const char* kCrops = "crops.jsonl";
constexpr const char* kChunks = "chunks.jsonl";
constexpr const char* kSweep = "sweep.json";
constexpr const char* kChunkGraphs = "chunkgraphs.jsonl";
constexpr const char* kKeyElements = "keyelements.jsonl";
constexpr const char* kCanonMap = "canonmap.json";
constexpr const char* kKg = "kg.json";
constexpr const char* kOntology = "ontology.json";
constexpr const char* kIndex = "index.json";
constexpr const char* kManifest = "manifest.json";
constexpr const char* kQuestions = "questions.jsonl";
constexpr const char* kVerdicts = "verdicts.jsonl";
constexpr const char* kReport = "report.json";

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", &tm);
    return std::string(buf) + "." + zero_pad(static_cast<std::size_t>(ms), 3) + "Z";
}

template <typename T>
T field(const json& obj, const char* key, T fallback, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + key + ": wrong type");
    }
}

const json& section(const json& root, const char* key) {
    static const json empty = json::object();
    if (!root.contains(key) || root.at(key).is_null()) return empty;
    if (!root.at(key).is_object()) throw ConfigError(std::string(key) + ": expected an object");
    return root.at(key);
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string write_lines(std::span<const json> records) { return to_jsonl(records); }

int parse_level(const std::string& condition) {
    if (condition.size() < 2 || condition[0] != 'O') {
        throw ConfigError("eval.conditions: unknown condition '" + condition + "' (expected O<level> or SS)");
    }
    try {
        std::size_t used = 0;
        const int level = std::stoi(condition.substr(1), &used);
        if (used + 1 != condition.size() || level < 0) throw std::invalid_argument(condition);
        return level;
    } catch (const std::exception&) {
        throw ConfigError("eval.conditions: unknown condition '" + condition + "' (expected O<level> or SS)");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

json interpolate_env(const json& value, const std::string& path) {
    static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
    if (value.is_string()) {
        const std::string s = value.get<std::string>();
        std::string out;
        auto begin = std::sregex_iterator(s.begin(), s.end(), var);
        std::size_t last = 0;
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            const std::string name = m[1].str();
            const char* env = std::getenv(name.c_str());
            if (env == nullptr) {
                throw ConfigError((path.empty() ? std::string("config") : path) +
                                  ": environment variable " + name + " is not set");
            }
            out += s.substr(last, static_cast<std::size_t>(m.position(0)) - last);
            out += env;
            last = static_cast<std::size_t>(m.position(0) + m.length(0));
        }
        out += s.substr(last);
        return out;
    }
    if (value.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : value.items()) {
            out[k] = interpolate_env(v, path.empty() ? k : path + "." + k);
        }
        return out;
    }
    if (value.is_array()) {
        json out = json::array();
        for (std::size_t i = 0; i < value.size(); ++i) {
            out.push_back(interpolate_env(value[i], path + "[" + std::to_string(i) + "]"));
        }
        return out;
    }
    return value;
}

void PipelineConfig::validate() const {
    if (workdir.empty()) throw ConfigError("workdir: required");
    if (corpus.empty()) throw ConfigError("corpus: required");
    if (!fs::exists(corpus)) throw ConfigError("corpus: file " + corpus.string() + " does not exist");
    if (!templates.empty() && !fs::is_directory(templates)) {
        throw ConfigError("templates: directory " + templates.string() + " does not exist");
    }
    if (!(target_units > 0.0)) throw ConfigError("ingest.target_units: must be positive");
    try {
        provider.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("provider: ") + e.what());
    }
    if (provider.kind == ProviderKind::mock && !provider.fixtures.empty() && !fs::exists(provider.fixtures)) {
        throw ConfigError("provider.fixtures: file " + provider.fixtures.string() + " does not exist");
    }
    try {
        chunking.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("chunking: ") + e.what());
    }
    if (chunk_mode != "hybrid" && chunk_mode != "fixed") {
        throw ConfigError("chunking.mode: expected hybrid or fixed, got '" + chunk_mode + "'");
    }
    for (double t : sweep) {
        if (t < -1.0 || t > 1.0) throw ConfigError("chunking.sweep: thresholds must lie in [-1, 1]");
    }
    if (baseline_size_tokens == 0 || baseline_overlap_tokens >= baseline_size_tokens) {
        throw ConfigError("baseline: overlap_tokens must be smaller than size_tokens");
    }
    if (extract.confidence_threshold < 0.0 || extract.confidence_threshold > 1.0) {
        throw ConfigError("extract.confidence_threshold: must lie in [0, 1]");
    }
    if (graph.batch_size == 0) throw ConfigError("graph.batch_size: must be positive");
    ontology.validate();
    retrieval.validate();
    if (eval.replicates == 0) throw ConfigError("eval.replicates: must be positive");
    if (eval.cluster_threshold < 0.0 || eval.cluster_threshold > 1.0) {
        throw ConfigError("eval.cluster_threshold: must lie in [0, 1]");
    }
    if (!eval.questions_file.empty() && !fs::exists(eval.questions_file)) {
        throw ConfigError("eval.questions: file " + eval.questions_file.string() + " does not exist");
    }
    for (const auto& c : eval.conditions) {
        if (c != "SS") parse_level(c);
    }
}

PipelineConfig config_from_json(const json& raw, const fs::path& config_dir) {
    if (!raw.is_object()) throw ConfigError("config: expected a JSON object");
    const json j = interpolate_env(raw);
    PipelineConfig c;
    c.config_dir = config_dir;
    c.workdir = resolve(config_dir, field<std::string>(j, "workdir", "work", ""));
    c.corpus = resolve(config_dir, field<std::string>(j, "corpus", "", ""));
    c.templates = resolve(config_dir, field<std::string>(j, "templates", "", ""));
    c.seed = field<std::uint64_t>(j, "seed", c.seed, "");

    const json& p = section(j, "provider");
    try {
        c.provider = provider_config_from_json(p);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("provider: ") + e.what());
    }
    if (!c.provider.fixtures.empty()) c.provider.fixtures = resolve(config_dir, c.provider.fixtures.string());
    if (!p.contains("seed")) c.provider.seed = c.seed;
    c.cache = field<bool>(p, "cache", c.cache, "provider.");
    if (!c.provider.cache_dir.empty()) c.provider.cache_dir = resolve(config_dir, c.provider.cache_dir.string());

    const json& ing = section(j, "ingest");
    c.target_units = field<double>(ing, "target_units", c.target_units, "ingest.");
    if (ing.contains("page_bounds")) {
        for (const auto& [doc, b] : ing.at("page_bounds").items()) {
            try {
                c.page_bounds.per_document[doc] = bbox_from_json(b);
            } catch (const std::exception&) {
                throw ConfigError("ingest.page_bounds." + doc + ": expected {x0,y0,x1,y1}");
            }
        }
    }

    const json& ch = section(j, "chunking");
    c.chunking.min_tokens = field<std::size_t>(ch, "min_tokens", c.chunking.min_tokens, "chunking.");
    c.chunking.max_tokens = field<std::size_t>(ch, "max_tokens", c.chunking.max_tokens, "chunking.");
    c.chunking.similarity_threshold =
        field<double>(ch, "threshold", c.chunking.similarity_threshold, "chunking.");
    c.chunking.neighbor_window = field<std::size_t>(ch, "window", c.chunking.neighbor_window, "chunking.");
    c.chunk_mode = field<std::string>(ch, "mode", c.chunk_mode, "chunking.");
    c.semantic_merge = field<bool>(ch, "semantic_merge", c.semantic_merge, "chunking.");
    c.sweep = field<std::vector<double>>(ch, "sweep", c.sweep, "chunking.");

    const json& bl = section(j, "baseline");
    c.baseline_size_tokens = field<std::size_t>(bl, "size_tokens", c.baseline_size_tokens, "baseline.");
    c.baseline_overlap_tokens =
        field<std::size_t>(bl, "overlap_tokens", c.baseline_overlap_tokens, "baseline.");

    const json& ex = section(j, "extract");
    c.extract.confidence_threshold =
        field<double>(ex, "confidence_threshold", c.extract.confidence_threshold, "extract.");
    c.extract.threads = field<std::size_t>(ex, "threads", c.extract.threads, "extract.");
    c.extract.max_context_chars =
        field<std::size_t>(ex, "max_context_chars", c.extract.max_context_chars, "extract.");

    const json& gr = section(j, "graph");
    c.graph.thresholds.theta_name = field<double>(gr, "theta_name", c.graph.thresholds.theta_name, "graph.");
    c.graph.thresholds.theta_def = field<double>(gr, "theta_def", c.graph.thresholds.theta_def, "graph.");
    c.graph.batch_size = field<std::size_t>(gr, "batch_size", c.graph.batch_size, "graph.");

    const json& on = section(j, "ontology");
    try {
        c.ontology = ontology_config_from_json(on);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("ontology: ") + e.what());
    }
    if (!on.contains("seed")) c.ontology.seed = c.seed;

    try {
        c.retrieval = retrieval_config_from_json(section(j, "retrieval"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("retrieval: ") + e.what());
    }

    const json& ev = section(j, "eval");
    c.eval.description = field<std::string>(ev, "description", "", "eval.");
    c.eval.questions_file = resolve(config_dir, field<std::string>(ev, "questions", "", "eval."));
    c.eval.plan.personas = field<std::size_t>(ev, "personas", c.eval.plan.personas, "eval.");
    c.eval.plan.tasks = field<std::size_t>(ev, "tasks", c.eval.plan.tasks, "eval.");
    c.eval.plan.questions = field<std::size_t>(ev, "questions_per_task", c.eval.plan.questions, "eval.");
    c.eval.conditions = field<std::vector<std::string>>(ev, "conditions", c.eval.conditions, "eval.");
    if (ev.contains("metrics")) {
        c.eval.metrics.clear();
        for (const auto& m : field<std::vector<std::string>>(ev, "metrics", {}, "eval.")) {
            try {
                c.eval.metrics.push_back(metric_from_string(m));
            } catch (const InvalidArgument& e) {
                throw ConfigError(std::string("eval.metrics: ") + e.what());
            }
        }
    }
    c.eval.replicates = field<std::size_t>(ev, "replicates", c.eval.replicates, "eval.");
    c.eval.cluster_threshold = field<double>(ev, "cluster_threshold", c.eval.cluster_threshold, "eval.");
    c.eval.baseline_top_k = field<std::size_t>(ev, "baseline_top_k", c.eval.baseline_top_k, "eval.");
    return c;
}

PipelineConfig load_config(const fs::path& path, const std::optional<fs::path>& workdir,
                           const std::optional<std::uint64_t>& seed) {
    json j;
    try {
        j = read_json(path);
    } catch (const Error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    if (seed) {
        j["seed"] = *seed;
        if (j.contains("ontology") && j["ontology"].is_object()) j["ontology"].erase("seed");
        if (j.contains("provider") && j["provider"].is_object()) j["provider"].erase("seed");
    }
    PipelineConfig c = config_from_json(j, fs::absolute(path).parent_path());
    if (workdir) c.workdir = fs::absolute(*workdir);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Stages and manifest

std::string to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::chunk: return "chunk";
        case Stage::extract: return "extract";
        case Stage::build_graph: return "build-graph";
        case Stage::build_ontology: return "build-ontology";
        case Stage::index_baseline: return "index-baseline";
    }
    return "ingest";
}

Stage stage_from_string(const std::string& s) {
    for (Stage st : all_stages()) {
        if (to_string(st) == s) return st;
    }
    throw ConfigError("unknown stage '" + s + "'");
}

std::vector<Stage> all_stages() {
    return {Stage::ingest, Stage::chunk, Stage::extract, Stage::build_graph, Stage::build_ontology,
            Stage::index_baseline};
}

json to_json(const StageManifest& m) {
    json stages = json::object();
    for (const auto& [name, r] : m.stages) {
        stages[name] = {{"inputs", r.inputs},
                        {"outputs", r.outputs},
                        {"config_digest", r.config_digest},
                        {"started_at", r.started_at},
                        {"finished_at", r.finished_at},
                        {"duration_ms", r.duration_ms}};
    }
    return json{{"stages", stages}};
}

StageManifest manifest_from_json(const json& j) {
    StageManifest m;
    const json stages = j.value("stages", json::object());
    for (const auto& [name, r] : stages.items()) {
        StageRecord rec;
        rec.inputs = r.value("inputs", std::map<std::string, std::string>{});
        rec.outputs = r.value("outputs", std::map<std::string, std::string>{});
        rec.config_digest = r.value("config_digest", std::string());
        rec.started_at = r.value("started_at", std::string());
        rec.finished_at = r.value("finished_at", std::string());
        rec.duration_ms = r.value("duration_ms", 0.0);
        m.stages[name] = std::move(rec);
    }
    return m;
}

StageManifest StageManifest::load(const fs::path& workdir) {
    const fs::path p = workdir / kManifest;
    if (!fs::exists(p)) return {};
    return manifest_from_json(read_json(p));
}

void StageManifest::save(const fs::path& workdir) const {
    write_file_atomic(workdir / kManifest, dump_pretty(to_json(*this)));
}

void Logger::log(const std::string& event, const json& fields) const {
    if (!enabled_) return;
    json record = fields.is_object() ? fields : json::object();
    record["ts"] = utc_now();
    record["event"] = event;
    std::cerr << record.dump() << '\n';
}

WorkdirLock::WorkdirLock(const fs::path& workdir) : path_(workdir / ".lock") {
    fs::create_directories(workdir);
    for (int attempt = 0; attempt < 2; ++attempt) {
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd >= 0) {
            const std::string pid = std::to_string(::getpid()) + "\n";
            [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
            ::close(fd);
            return;
        }
        // Take over a lock whose owner is gone.
        long owner = 0;
        try {
            owner = std::stol(read_file(path_));
        } catch (const std::exception&) {
            owner = 0;
        }
        if (owner > 0 && ::kill(static_cast<pid_t>(owner), 0) == 0) break;
        std::error_code ec;
        fs::remove(path_, ec);
    }
    throw Error("workdir " + workdir.string() + " is locked by another run (" + path_.string() + ")");
}

WorkdirLock::~WorkdirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

StageError::StageError(Stage stage, const std::string& what)
    : Error("stage " + to_string(stage) + " failed: " + what), stage_(stage) {}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig config, Logger logger)
    : config_(std::move(config)), logger_(logger) {
    templates_ = config_.templates.empty() ? TemplateStore::load_default() : TemplateStore(config_.templates);
    ProviderConfig pc = config_.provider;
    if (config_.cache && pc.cache_dir.empty()) pc.cache_dir = config_.workdir / "cache";
    if (!config_.cache) pc.cache_dir.clear();
    provider_ = make_provider(pc);
}

Provider& Pipeline::provider() { return *provider_; }

fs::path Pipeline::path(const std::string& name) const { return config_.workdir / name; }

std::vector<std::string> Pipeline::stage_inputs(Stage stage) const {
    switch (stage) {
        case Stage::ingest: return {"corpus"};
        case Stage::chunk: return {kElements};
        case Stage::extract: return {kChunks};
        case Stage::build_graph: return {kChunkGraphs, kKeyElements, kCanonMap};
        case Stage::build_ontology: return {kKg, kKeyElements};
        case Stage::index_baseline: return {kElements};
    }
    return {};
}

std::vector<std::string> Pipeline::stage_outputs(Stage stage) const {
    switch (stage) {
        case Stage::ingest: return {kElements, kCrops};
        case Stage::chunk:
            if (config_.sweep.empty()) return {kChunks};
            return {kChunks, kSweep};
        case Stage::extract: return {kChunkGraphs, kKeyElements, kCanonMap};
        case Stage::build_graph: return {kKg};
        case Stage::build_ontology: return {kOntology};
        case Stage::index_baseline: return {kIndex};
    }
    return {};
}

json Pipeline::stage_config(Stage stage) const {
    const json provider = provider_identity(config_.provider);
    switch (stage) {
        case Stage::ingest: {
            json bounds = json::object();
            for (const auto& [doc, b] : config_.page_bounds.per_document) bounds[doc] = to_json(b);
            return {{"target_units", config_.target_units}, {"page_bounds", bounds}};
        }
        case Stage::chunk:
            return {{"mode", config_.chunk_mode},
                    {"min_tokens", config_.chunking.min_tokens},
                    {"max_tokens", config_.chunking.max_tokens},
                    {"threshold", config_.chunking.similarity_threshold},
                    {"window", config_.chunking.neighbor_window},
                    {"semantic_merge", config_.semantic_merge},
                    {"sweep", config_.sweep},
                    {"provider", config_.semantic_merge && config_.chunk_mode == "hybrid" ? provider : json(nullptr)}};
        case Stage::extract:
            return {{"confidence_threshold", config_.extract.confidence_threshold},
                    {"max_context_chars", config_.extract.max_context_chars},
                    {"provider", provider},
                    {"templates", templates_.digest()}};
        case Stage::build_graph:
            return {{"theta_name", config_.graph.thresholds.theta_name},
                    {"theta_def", config_.graph.thresholds.theta_def},
                    {"batch_size", config_.graph.batch_size}};
        case Stage::build_ontology:
            return {{"ontology", to_json(config_.ontology)},
                    {"provider", provider},
                    {"templates", templates_.digest()}};
        case Stage::index_baseline:
            return {{"size_tokens", config_.baseline_size_tokens},
                    {"overlap_tokens", config_.baseline_overlap_tokens},
                    {"provider", provider}};
    }
    return json::object();
}

std::string Pipeline::stage_config_digest(Stage stage) const {
    json upstream = json::array();
    switch (stage) {
        case Stage::ingest: break;
        case Stage::chunk: upstream.push_back(stage_config_digest(Stage::ingest)); break;
        case Stage::extract: upstream.push_back(stage_config_digest(Stage::chunk)); break;
        case Stage::build_graph: upstream.push_back(stage_config_digest(Stage::extract)); break;
        case Stage::build_ontology: upstream.push_back(stage_config_digest(Stage::build_graph)); break;
        case Stage::index_baseline: upstream.push_back(stage_config_digest(Stage::ingest)); break;
    }
    return json_digest({{"stage", to_string(stage)}, {"config", stage_config(stage)}, {"upstream", upstream}});
}

bool Pipeline::is_fresh(Stage stage, const StageManifest& manifest) const {
    auto it = manifest.stages.find(to_string(stage));
    if (it == manifest.stages.end()) return false;
    const StageRecord& r = it->second;
    if (r.config_digest != stage_config_digest(stage)) return false;
    for (const auto& in : stage_inputs(stage)) {
        const fs::path p = in == "corpus" ? config_.corpus : path(in);
        auto rec = r.inputs.find(in);
        if (rec == r.inputs.end() || file_digest(p) != rec->second) return false;
    }
    for (const auto& out : stage_outputs(stage)) {
        auto rec = r.outputs.find(out);
        if (rec == r.outputs.end() || file_digest(path(out)) != rec->second) return false;
    }
    return true;
}

StageManifest Pipeline::run(const std::vector<Stage>& stages) {
    WorkdirLock lock(config_.workdir);
    StageManifest manifest = StageManifest::load(config_.workdir);
    for (Stage stage : all_stages()) {
        if (std::find(stages.begin(), stages.end(), stage) == stages.end()) continue;
        const std::string name = to_string(stage);
        if (is_fresh(stage, manifest)) {
            logger_.log("stage_skipped", {{"stage", name}, {"reason", "fresh"}});
            continue;
        }
        StageRecord rec;
        for (const auto& in : stage_inputs(stage)) {
            const fs::path p = in == "corpus" ? config_.corpus : path(in);
            if (!fs::exists(p)) {
                throw StageError(stage, "missing input " + p.string());
            }
            rec.inputs[in] = file_digest(p);
        }
        rec.config_digest = stage_config_digest(stage);
        rec.started_at = utc_now();
        logger_.log("stage_started", {{"stage", name}});
        const auto t0 = std::chrono::steady_clock::now();
        try {
            run_stage(stage);
        } catch (const ConfigError&) {
            throw;
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            logger_.log("stage_failed", {{"stage", name}, {"error", e.what()}});
            throw StageError(stage, e.what());
        }
        rec.duration_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        rec.finished_at = utc_now();
        for (const auto& out : stage_outputs(stage)) rec.outputs[out] = file_digest(path(out));
        manifest.stages[name] = rec;
        manifest.save(config_.workdir);
        logger_.log("stage_finished", {{"stage", name}, {"duration_ms", rec.duration_ms}});
    }
    return manifest;
}

void Pipeline::run_stage(Stage stage) {
    const std::string name = to_string(stage);
    switch (stage) {
        case Stage::ingest: {
            const auto elements = load_elements(config_.corpus);
            std::vector<json> crops;
            for (const auto& e : elements) {
                if (e.kind != ElementKind::table) continue;
                crops.push_back(to_json(extract_table_region(e, config_.target_units,
                                                             config_.page_bounds.lookup(e.doc_id))));
            }
            write_file_atomic(path(kElements), serialize_elements(elements));
            write_file_atomic(path(kCrops), write_lines(crops));
            logger_.log("stage_counts", {{"stage", name}, {"elements", elements.size()}, {"crops", crops.size()}});
            break;
        }
        case Stage::chunk: {
            const auto elements = load_elements(path(kElements));
            const bool fixed = config_.chunk_mode == "fixed";
            std::vector<Chunk> chunks = fixed ? fixed_chunk_elements(elements, config_.chunking.max_tokens, 0)
                                              : hybrid_chunk(elements, config_.chunking);
            const std::size_t hybrid_count = chunks.size();
            if (!fixed && config_.semantic_merge && !chunks.empty()) {
                const auto combined = combine_neighbors(chunks, config_.chunking.neighbor_window);
                const auto embeddings = provider_->embed(combined);
                if (!config_.sweep.empty()) {
                    const SweepReport report = threshold_sweep(chunks, embeddings, config_.sweep,
                                                               config_.chunking.max_tokens);
                    write_file_atomic(path(kSweep), dump_pretty(to_json(report)));
                }
                chunks = semantic_merge(chunks, embeddings, config_.chunking.similarity_threshold,
                                        config_.chunking.max_tokens);
            } else if (!config_.sweep.empty()) {
                write_file_atomic(path(kSweep), dump_pretty(to_json(SweepReport{})));
            }
            write_file_atomic(path(kChunks), serialize_chunks(chunks));
            logger_.log("stage_counts",
                        {{"stage", name}, {"initial_chunks", hybrid_count}, {"chunks", chunks.size()}});
            break;
        }
        case Stage::extract: {
            const auto chunks = load_chunks(path(kChunks));
            ExtractConfig ec = config_.extract;
            const ExtractResult r = run_extract(provider_, templates_, chunks, ec);
            std::vector<json> graphs, keys;
            for (const auto& g : r.chunk_graphs) graphs.push_back(to_json(g));
            for (const auto& k : r.key_elements) keys.push_back(to_json(k));
            json canon = to_json(r.canon);
            canon["config_digest"] = stage_config_digest(stage);
            write_file_atomic(path(kChunkGraphs), to_jsonl(graphs));
            write_file_atomic(path(kKeyElements), to_jsonl(keys));
            write_file_atomic(path(kCanonMap), dump_pretty(canon));
            logger_.log("stage_counts", {{"stage", name},
                                         {"chunk_graphs", graphs.size()},
                                         {"key_elements", keys.size()},
                                         {"mentions", r.canon.mentions.size()}});
            break;
        }
        case Stage::build_graph: {
            std::vector<ChunkGraph> graphs;
            for (const auto& j : read_jsonl(path(kChunkGraphs))) graphs.push_back(chunk_graph_from_json(j));
            std::vector<KeyElement> keys;
            for (const auto& j : read_jsonl(path(kKeyElements))) keys.push_back(key_element_from_json(j));
            const CanonicalMap canon = canonical_map_from_json(read_json(path(kCanonMap)));
            const KnowledgeGraph kg = build_knowledge_graph(keys, graphs, canon, config_.graph);
            json out = to_json(kg);
            out["config_digest"] = stage_config_digest(stage);
            write_file_atomic(path(kKg), dump_pretty(out));
            logger_.log("stage_counts",
                        {{"stage", name}, {"classes", kg.classes.size()}, {"edges", kg.edges.size()}});
            break;
        }
        case Stage::build_ontology: {
            const KnowledgeGraph kg = knowledge_graph_from_json(read_json(path(kKg)));
            std::vector<KeyElement> keys;
            for (const auto& j : read_jsonl(path(kKeyElements))) keys.push_back(key_element_from_json(j));
            Ontology onto = build_ontology(kg, keys, *provider_, templates_, config_.ontology);
            onto.config_digest = stage_config_digest(stage);
            write_file_atomic(path(kOntology), dump_pretty(to_json(onto)));
            json levels = json::array();
            for (const auto& lv : onto.levels) {
                levels.push_back({{"level", lv.level},
                                  {"classes", lv.classes.size()},
                                  {"relationships", lv.relationships.size()},
                                  {"modularity", lv.modularity ? json(*lv.modularity) : json(nullptr)}});
            }
            logger_.log("stage_counts", {{"stage", name}, {"levels", levels}});
            break;
        }
        case Stage::index_baseline: {
            const auto elements = load_elements(path(kElements));
            auto chunks = fixed_chunk_elements(elements, config_.baseline_size_tokens,
                                               config_.baseline_overlap_tokens);
            const VectorIndex index = build_vector_index(*provider_, std::move(chunks));
            json out = to_json(index);
            out["config_digest"] = stage_config_digest(stage);
            write_file_atomic(path(kIndex), dump_pretty(out));
            logger_.log("stage_counts", {{"stage", name}, {"chunks", index.chunks.size()}});
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Query and evaluation

namespace {

Ontology load_ontology_file(const fs::path& p) {
    if (!fs::exists(p)) throw ConfigError(p.string() + " not found; run build-ontology first");
    return ontology_from_json(read_json(p));
}

std::vector<Chunk> load_chunk_file(const fs::path& p) {
    if (!fs::exists(p)) throw ConfigError(p.string() + " not found; run chunk first");
    return load_chunks(p);
}

std::vector<Question> load_questions(const fs::path& p) {
    std::vector<Question> out;
    for (const auto& j : read_jsonl(p)) out.push_back(question_from_json(j));
    return out;
}

}  // namespace

QueryResult Pipeline::query(const std::string& question, const RetrievalConfig& retrieval) {
    const Ontology onto = load_ontology_file(path(kOntology));
    const ChunkStore store(load_chunk_file(path(kChunks)));
    return ontology_query(*provider_, templates_, onto, store, question, retrieval);
}

std::vector<Question> Pipeline::generate_questions() {
    std::vector<Question> questions;
    if (!config_.eval.questions_file.empty()) {
        questions = load_questions(config_.eval.questions_file);
    } else {
        if (trim(config_.eval.description).empty()) {
            throw ConfigError("eval.description: required to generate questions");
        }
        questions = ontorag::generate_questions(*provider_, templates_, config_.eval.description,
                                                config_.eval.plan);
    }
    std::vector<json> lines;
    for (const auto& q : questions) lines.push_back(to_json(q));
    fs::create_directories(config_.workdir);
    write_file_atomic(path(kQuestions), to_jsonl(lines));
    logger_.log("questions_written", {{"count", questions.size()}});
    return questions;
}

void Pipeline::run_conditions(const std::vector<std::string>& conditions) {
    if (!fs::exists(path(kQuestions))) {
        throw ConfigError(path(kQuestions).string() + " not found; run eval generate-questions first");
    }
    const auto questions = load_questions(path(kQuestions));
    std::optional<Ontology> onto;
    std::optional<ChunkStore> store;
    std::optional<VectorIndex> index;
    for (const auto& cond : conditions) {
        std::optional<int> level;
        if (cond == "SS") {
            if (!index) {
                if (!fs::exists(path(kIndex))) throw ConfigError("index.json not found; run index-baseline first");
                index = vector_index_from_json(read_json(path(kIndex)));
            }
        } else {
            level = parse_level(cond);
            if (!onto) onto = load_ontology_file(path(kOntology));
            if (!store) store.emplace(load_chunk_file(path(kChunks)));
            if (onto->level(*level) == nullptr) {
                throw ConfigError("eval.conditions: ontology has no level " + std::to_string(*level));
            }
        }
        const fs::path dir = config_.workdir / "answers" / cond;
        fs::create_directories(dir);
        std::vector<json> results(questions.size());
        parallel_for(questions.size(), config_.extract.threads, [&](std::size_t i) {
            QueryResult r;
            if (level) {
                RetrievalConfig rc = config_.retrieval;
                rc.level = *level;
                r = ontology_query(*provider_, templates_, *onto, *store, questions[i].text, rc);
            } else {
                r = vector_query(*provider_, templates_, *index, questions[i].text, config_.eval.baseline_top_k);
            }
            json j = to_json(r);
            j["question_id"] = questions[i].id;
            j["condition"] = cond;
            results[i] = std::move(j);
        });
        for (std::size_t i = 0; i < questions.size(); ++i) {
            write_file_atomic(dir / (questions[i].id + ".json"), dump_pretty(results[i]));
        }
        logger_.log("condition_answered", {{"condition", cond}, {"answers", questions.size()}});
    }
}

std::vector<std::string> Pipeline::answered_conditions() const {
    const fs::path dir = config_.workdir / "answers";
    std::vector<std::string> found;
    if (fs::is_directory(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_directory()) found.push_back(e.path().filename().string());
        }
    }
    std::sort(found.begin(), found.end());
    std::vector<std::string> ordered;
    for (const auto& c : config_.eval.conditions) {
        if (std::find(found.begin(), found.end(), c) != found.end()) ordered.push_back(c);
    }
    for (const auto& c : found) {
        if (std::find(ordered.begin(), ordered.end(), c) == ordered.end()) ordered.push_back(c);
    }
    return ordered;
}

std::vector<JudgeVerdict> Pipeline::judge(const std::vector<Metric>& metrics, std::size_t replicates) {
    if (replicates == 0) throw ConfigError("eval.replicates: must be positive");
    const auto questions = load_questions(path(kQuestions));
    const auto conditions = answered_conditions();
    if (conditions.size() < 2) throw ConfigError("eval judge needs answers for at least two conditions");

    struct Job {
        JudgeRequest request;
        Metric metric;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < conditions.size(); ++a) {
        for (std::size_t b = a + 1; b < conditions.size(); ++b) {
            for (const auto& q : questions) {
                auto answer_of = [&](const std::string& cond) {
                    const fs::path p = config_.workdir / "answers" / cond / (q.id + ".json");
                    if (!fs::exists(p)) throw ConfigError(p.string() + " not found; run eval run first");
                    return read_json(p).at("answer").get<std::string>();
                };
                JudgeRequest req{q.id, q.text, conditions[a], answer_of(conditions[a]), conditions[b],
                                 answer_of(conditions[b])};
                for (Metric m : metrics) jobs.push_back({req, m});
            }
        }
    }
    std::vector<std::vector<JudgeVerdict>> results(jobs.size());
    parallel_for(jobs.size(), config_.extract.threads, [&](std::size_t i) {
        results[i] = judge_pairwise(*provider_, templates_, jobs[i].request, jobs[i].metric, replicates,
                                    config_.seed);
    });
    std::vector<JudgeVerdict> verdicts;
    std::vector<json> lines;
    std::size_t warnings = 0;
    for (auto& r : results) {
        for (auto& v : r) {
            if (!v.warning.empty()) ++warnings;
            lines.push_back(to_json(v));
            verdicts.push_back(std::move(v));
        }
    }
    write_file_atomic(path(kVerdicts), to_jsonl(lines));
    logger_.log("verdicts_written", {{"count", verdicts.size()}, {"warnings", warnings}});
    return verdicts;
}

json Pipeline::report() {
    const auto questions = load_questions(path(kQuestions));
    const auto conditions = answered_conditions();

    json per_condition = json::object();
    for (const auto& cond : conditions) {
        std::vector<json> entries(questions.size());
        parallel_for(questions.size(), config_.extract.threads, [&](std::size_t i) {
            const fs::path p = config_.workdir / "answers" / cond / (questions[i].id + ".json");
            if (!fs::exists(p)) return;
            const std::string answer_text = read_json(p).at("answer").get<std::string>();
            const ClaimSet claims =
                extract_claims(*provider_, templates_, cond + "/" + questions[i].id, answer_text);
            const ClusterSet clusters = cluster_claims(claims.claims, config_.eval.cluster_threshold);
            entries[i] = {{"question_id", questions[i].id},
                          {"claims", claims.claims},
                          {"clusters", clusters.clusters}};
        });
        double claim_total = 0.0, cluster_total = 0.0;
        std::size_t answered = 0;
        json items = json::array();
        for (auto& e : entries) {
            if (e.is_null()) continue;
            ++answered;
            claim_total += static_cast<double>(e.at("claims").size());
            cluster_total += static_cast<double>(e.at("clusters").size());
            items.push_back(std::move(e));
        }
        per_condition[cond] = {{"answers", answered},
                               {"mean_claims", answered ? claim_total / static_cast<double>(answered) : 0.0},
                               {"mean_clusters", answered ? cluster_total / static_cast<double>(answered) : 0.0},
                               {"per_question", items}};
    }

    std::vector<JudgeVerdict> verdicts;
    std::size_t warnings = 0;
    if (fs::exists(path(kVerdicts))) {
        for (const auto& j : read_jsonl(path(kVerdicts))) {
            verdicts.push_back(verdict_from_json(j));
            if (!verdicts.back().warning.empty()) ++warnings;
        }
    }
    json out{{"cluster_threshold", config_.eval.cluster_threshold},
             {"linkage", "average"},
             {"distance", "rouge-l"},
             {"conditions", per_condition},
             {"verdicts", verdicts.size()},
             {"verdict_warnings", warnings},
             {"win_rates", to_json(win_rates(verdicts))},
             {"seed", config_.seed}};
    write_file_atomic(path(kReport), dump_pretty(out));
    logger_.log("report_written", {{"conditions", conditions.size()}, {"verdicts", verdicts.size()}});
    return out;
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_artifacts(const fs::path& workdir) {
    ValidationReport report;
    auto& v = report.violations;
    auto file = [&](const char* name) { return workdir / name; };

    std::set<std::string> expected;
    if (fs::exists(file(kManifest))) {
        try {
            for (const auto& [stage, rec] : StageManifest::load(workdir).stages) {
                for (const auto& [out, digest] : rec.outputs) {
                    expected.insert(out);
                    if (fs::exists(workdir / out) && file_digest(workdir / out) != digest) {
                        v.push_back(out + ": content differs from the digest recorded by stage " + stage);
                    }
                }
            }
        } catch (const std::exception& e) {
            v.push_back(std::string("manifest.json: unreadable: ") + e.what());
        }
    } else {
        v.push_back("missing manifest.json");
    }
    for (const auto& name : expected) {
        if (!fs::exists(workdir / name)) v.push_back("missing " + name + " (listed in manifest.json)");
    }

    auto guarded = [&](const char* name, const std::function<void()>& fn) {
        if (!fs::exists(file(name))) return false;
        try {
            fn();
            return true;
        } catch (const std::exception& e) {
            v.push_back(std::string(name) + ": " + e.what());
            return false;
        }
    };

    std::set<std::string> element_ids;  // doc_id + '\n' + id
    const bool have_elements = guarded(kElements, [&] {
        for (const auto& e : load_elements(file(kElements))) element_ids.insert(e.doc_id + '\n' + e.id);
    });
    std::set<std::string> chunk_ids;
    const bool have_chunks = guarded(kChunks, [&] {
        for (const auto& c : load_chunks(file(kChunks))) {
            if (!chunk_ids.insert(c.id).second) v.push_back("chunks.jsonl: duplicate chunk id " + c.id);
            if (!have_elements) continue;
            for (const auto& eid : c.element_ids) {
                if (!element_ids.count(c.doc_id + '\n' + eid)) {
                    v.push_back("chunks.jsonl: chunk " + c.id + " cites unknown element " + eid);
                }
            }
        }
    });
    guarded(kChunkGraphs, [&] {
        for (const auto& j : read_jsonl(file(kChunkGraphs))) {
            const ChunkGraph g = chunk_graph_from_json(j);
            if (have_chunks && !chunk_ids.count(g.chunk_id)) {
                v.push_back("chunkgraphs.jsonl: unknown chunk " + g.chunk_id);
            }
            for (const auto& err : g.integrity_errors()) v.push_back("chunkgraphs.jsonl: " + err);
        }
    });
    std::set<std::string> key_ids;
    const bool have_keys = guarded(kKeyElements, [&] {
        for (const auto& j : read_jsonl(file(kKeyElements))) {
            const KeyElement k = key_element_from_json(j);
            key_ids.insert(k.id);
            if (!have_chunks) continue;
            for (const auto& c : k.source_chunk_ids) {
                if (!chunk_ids.count(c)) v.push_back("keyelements.jsonl: " + k.id + " cites unknown chunk " + c);
            }
        }
    });
    guarded(kCanonMap, [&] {
        const CanonicalMap m = canonical_map_from_json(read_json(file(kCanonMap)));
        for (const auto& [mention, mapped] : m.mentions) {
            if (!m.canonicals.count(mapped.canonical_id)) {
                v.push_back("canonmap.json: mention '" + mention + "' maps to unknown " + mapped.canonical_id);
            }
        }
        if (have_keys) {
            for (const auto& [id, entry] : m.canonicals) {
                if (!key_ids.count(id)) v.push_back("canonmap.json: canonical " + id + " has no key element");
            }
        }
    });
    std::set<std::string> class_ids;
    const bool have_kg = guarded(kKg, [&] {
        const KnowledgeGraph kg = knowledge_graph_from_json(read_json(file(kKg)));
        for (const auto& err : kg.integrity_errors()) v.push_back("kg.json: " + err);
        for (const auto& c : kg.classes) {
            class_ids.insert(c.id);
            if (!have_keys) continue;
            for (const auto& m : c.member_ids) {
                if (!key_ids.count(m)) v.push_back("kg.json: class " + c.id + " references absent member " + m);
            }
        }
    });
    guarded(kOntology, [&] {
        const Ontology onto = ontology_from_json(read_json(file(kOntology)));
        for (const auto& err : onto.integrity_errors()) v.push_back("ontology.json: " + err);
        for (const auto& lv : onto.levels) {
            for (const auto& c : lv.classes) {
                for (const auto& m : c.members) {
                    if (have_kg && !class_ids.count(m)) {
                        v.push_back("ontology.json: class " + c.id + " references absent member " + m);
                    }
                }
                for (const auto& ch : c.source_chunk_ids) {
                    if (have_chunks && !chunk_ids.count(ch)) {
                        v.push_back("ontology.json: class " + c.id + " cites unknown chunk " + ch);
                    }
                }
            }
        }
    });
    guarded(kIndex, [&] {
        const VectorIndex index = vector_index_from_json(read_json(file(kIndex)));
        std::set<std::string> ids;
        for (const auto& c : index.chunks) {
            if (!ids.insert(c.id).second) v.push_back("index.json: duplicate chunk id " + c.id);
        }
    });
    return report;
}

}  // namespace ontorag
