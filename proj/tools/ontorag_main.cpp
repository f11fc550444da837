#include "ontorag/errors.hpp"
#include "ontorag/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace ontorag;

std::vector<std::string> split_list(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& list, const char* flag) {
    std::vector<double> out;
    for (const auto& part : split_list(list)) {
        const std::string& item = part;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(std::string(flag) + ": '" + item + "' is not a number");
        }
    }
    return out;
}

struct GlobalOptions {
    std::string config = "ontorag.json";
    std::optional<std::string> workdir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

struct ChunkOptions {
    std::optional<std::string> mode;
    std::optional<std::size_t> min_tokens, max_tokens;
    std::optional<double> threshold;
    std::optional<std::string> sweep;
    std::optional<bool> semantic_merge;
};

struct ExtractOptions {
    std::optional<double> threshold;
    std::optional<std::string> provider;
};

struct GraphOptions {
    std::optional<double> theta_name, theta_def;
    std::optional<std::size_t> batch_size;
};

struct OntologyOptions {
    std::optional<int> depth;
    std::optional<std::string> resolution;
    std::optional<std::uint64_t> seed;
    bool report_modularity = false;
};

struct QueryOptions {
    std::optional<int> level;
    std::optional<std::size_t> top_k, window, max_context;
    bool as_json = false;
    std::string question;
};

struct EvalOptions {
    std::optional<std::string> conditions;
    std::string metric = "all";
    std::optional<std::size_t> replicates;
};

PipelineConfig load(const GlobalOptions& g) {
    std::optional<std::filesystem::path> workdir;
    if (g.workdir) workdir = *g.workdir;
    return load_config(g.config, workdir, g.seed);
}

void apply(PipelineConfig& c, const ChunkOptions& o) {
    if (o.mode) c.chunk_mode = *o.mode;
    if (o.min_tokens) c.chunking.min_tokens = *o.min_tokens;
    if (o.max_tokens) c.chunking.max_tokens = *o.max_tokens;
    if (o.threshold) c.chunking.similarity_threshold = *o.threshold;
    if (o.sweep) c.sweep = parse_doubles(*o.sweep, "--sweep");
    if (o.semantic_merge) c.semantic_merge = *o.semantic_merge;
}

void apply(PipelineConfig& c, const ExtractOptions& o) {
    if (o.threshold) c.extract.confidence_threshold = *o.threshold;
    if (o.provider) {
        if (*o.provider == "mock") {
            c.provider.kind = ProviderKind::mock;
        } else if (*o.provider == "http") {
            c.provider.kind = ProviderKind::http;
        } else {
            throw ConfigError("--provider: expected mock or http");
        }
    }
}

void apply(PipelineConfig& c, const GraphOptions& o) {
    if (o.theta_name) c.graph.thresholds.theta_name = *o.theta_name;
    if (o.theta_def) c.graph.thresholds.theta_def = *o.theta_def;
    if (o.batch_size) c.graph.batch_size = *o.batch_size;
}

void apply(PipelineConfig& c, const OntologyOptions& o) {
    if (o.depth) c.ontology.max_depth = *o.depth;
    if (o.resolution) c.ontology.resolutions = parse_doubles(*o.resolution, "--resolution");
    if (o.seed) c.ontology.seed = *o.seed;
}

std::vector<Metric> parse_metrics(const std::string& names) {
    if (names == "all") return all_metrics();
    std::vector<Metric> out;
    for (const auto& part : split_list(names)) {
        try {
            out.push_back(metric_from_string(part));
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("--metric: ") + e.what());
        }
    }
    return out;
}

void print_modularity(const std::filesystem::path& workdir) {
    const Ontology onto = ontology_from_json(read_json(workdir / "ontology.json"));
    for (const auto& lv : onto.levels) {
        std::cout << "level " << lv.level << ": " << lv.classes.size() << " classes, modularity ";
        if (lv.modularity) {
            std::cout << *lv.modularity;
        } else {
            std::cout << "n/a";
        }
        std::cout << '\n';
    }
}

void print_answer(const QueryResult& r) {
    std::cout << r.answer.text << '\n';
    if (r.context.spans.empty()) return;
    std::cout << "\nSources:\n";
    for (const auto& s : r.context.spans) {
        std::cout << "  " << s.doc_id << " tokens " << s.token_begin << "-" << s.token_end << " via "
                  << s.class_id << " (" << join(s.chunk_ids, ", ") << ")\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ontology-grounded retrieval-augmented generation pipeline"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config, "Pipeline configuration file")->capture_default_str();
    app.add_option("--workdir", g.workdir, "Artifact directory (overrides the config)");
    app.add_option("--seed", g.seed, "Global seed (overrides every seed in the config)");
    app.add_flag("-q,--quiet", g.quiet, "Suppress JSON log lines on stderr");

    std::vector<std::string> run_stages;
    auto* run = app.add_subcommand("run", "Run pipeline stages, skipping fresh ones");
    run->add_option("stages", run_stages, "Stages to run (default: all)");

    auto* ingest = app.add_subcommand("ingest", "Load elements and emit table crop requests");
    auto* index = app.add_subcommand("index-baseline", "Build the fixed-size vector index");

    ChunkOptions chunk_opts;
    auto* chunk = app.add_subcommand("chunk", "Hybrid or fixed chunking with optional semantic merge");
    chunk->add_option("--mode", chunk_opts.mode, "hybrid or fixed")
        ->check(CLI::IsMember({"hybrid", "fixed"}));
    chunk->add_option("--min", chunk_opts.min_tokens, "Minimum tokens before a title closes a chunk");
    chunk->add_option("--max", chunk_opts.max_tokens, "Maximum tokens per chunk");
    chunk->add_option("--threshold", chunk_opts.threshold, "Semantic merge cosine threshold");
    chunk->add_option("--sweep", chunk_opts.sweep, "Comma-separated thresholds for sweep.json");
    chunk->add_option("--semantic-merge", chunk_opts.semantic_merge, "true or false");

    ExtractOptions extract_opts;
    auto* extract = app.add_subcommand("extract", "Clean, resolve, extract facts and canonicalize");
    extract->add_option("--threshold", extract_opts.threshold, "Canonical mapping confidence threshold");
    extract->add_option("--provider", extract_opts.provider, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));

    GraphOptions graph_opts;
    auto* graph = app.add_subcommand("build-graph", "Merge key elements into the knowledge graph");
    graph->add_option("--theta-name", graph_opts.theta_name, "Name similarity threshold");
    graph->add_option("--theta-def", graph_opts.theta_def, "Definition similarity threshold");
    graph->add_option("--batch-size", graph_opts.batch_size, "Similarity batch size");

    OntologyOptions onto_opts;
    auto* ontology = app.add_subcommand("build-ontology", "Detect communities and name classes per level");
    ontology->add_option("--depth", onto_opts.depth, "Number of hierarchy levels");
    ontology->add_option("--resolution", onto_opts.resolution, "Resolution, or a comma list per level");
    ontology->add_option("--seed", onto_opts.seed, "Community detection seed");
    ontology->add_flag("--report-modularity", onto_opts.report_modularity, "Print modularity per level");

    QueryOptions query_opts;
    auto* query = app.add_subcommand("query", "Answer a question from the ontology");
    query->add_option("--level", query_opts.level, "Ontology level to match against");
    query->add_option("--top-k", query_opts.top_k, "Classes per query key");
    query->add_option("--window", query_opts.window, "Context window in tokens around each chunk");
    query->add_option("--max-context", query_opts.max_context, "Context budget in tokens");
    query->add_flag("--json", query_opts.as_json, "Print the full result as JSON");
    query->add_option("question", query_opts.question, "Question text")->required();

    EvalOptions eval_opts;
    auto* eval = app.add_subcommand("eval", "Evaluation harness");
    eval->require_subcommand(1);
    auto* gen = eval->add_subcommand("generate-questions", "Write questions.jsonl");
    auto* eval_run = eval->add_subcommand("run", "Answer every question under each condition");
    eval_run->add_option("--conditions", eval_opts.conditions, "Comma list such as O0,O2,SS");
    auto* judge = eval->add_subcommand("judge", "Pairwise judging of answered conditions");
    judge->add_option("--metric", eval_opts.metric, "all, or a comma list of metrics")->capture_default_str();
    judge->add_option("--replicates", eval_opts.replicates, "Judgements per pair and metric");
    auto* report = eval->add_subcommand("report", "Claims, clusters and win rates");

    auto* validate = app.add_subcommand("validate", "Check artifact files and their cross references");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) {
            std::filesystem::path workdir;
            if (g.workdir) {
                workdir = *g.workdir;
            } else {
                workdir = load(g).workdir;
            }
            const ValidationReport r = validate_artifacts(workdir);
            for (const auto& v : r.violations) std::cout << v << '\n';
            if (r.ok()) std::cout << "ok\n";
            return r.ok() ? 0 : 2;
        }

        PipelineConfig config = load(g);
        apply(config, chunk_opts);
        apply(config, extract_opts);
        apply(config, graph_opts);
        apply(config, onto_opts);
        config.validate();
        Pipeline pipeline(config, Logger(!g.quiet));

        if (run->parsed()) {
            std::vector<Stage> stages;
            for (const auto& s : run_stages) stages.push_back(stage_from_string(s));
            if (stages.empty()) stages = all_stages();
            pipeline.run(stages);
        } else if (ingest->parsed()) {
            pipeline.run({Stage::ingest});
        } else if (chunk->parsed()) {
            pipeline.run({Stage::chunk});
        } else if (extract->parsed()) {
            pipeline.run({Stage::extract});
        } else if (graph->parsed()) {
            pipeline.run({Stage::build_graph});
        } else if (ontology->parsed()) {
            pipeline.run({Stage::build_ontology});
            if (onto_opts.report_modularity) print_modularity(config.workdir);
        } else if (index->parsed()) {
            pipeline.run({Stage::index_baseline});
        } else if (query->parsed()) {
            RetrievalConfig rc = config.retrieval;
            if (query_opts.level) rc.level = *query_opts.level;
            if (query_opts.top_k) rc.top_k_classes = *query_opts.top_k;
            if (query_opts.window) rc.context_window_tokens = *query_opts.window;
            if (query_opts.max_context) rc.max_context_tokens = *query_opts.max_context;
            rc.validate();
            const QueryResult r = pipeline.query(query_opts.question, rc);
            if (query_opts.as_json) {
                std::cout << dump_pretty(to_json(r)) << '\n';
            } else {
                print_answer(r);
            }
        } else if (gen->parsed()) {
            const auto questions = pipeline.generate_questions();
            std::cout << questions.size() << " questions written to "
                      << (config.workdir / "questions.jsonl").string() << '\n';
        } else if (eval_run->parsed()) {
            std::vector<std::string> conditions = config.eval.conditions;
            if (eval_opts.conditions) {
                conditions.clear();
                conditions = split_list(*eval_opts.conditions);
            }
            pipeline.run_conditions(conditions);
        } else if (judge->parsed()) {
            const auto verdicts = pipeline.judge(parse_metrics(eval_opts.metric),
                                                 eval_opts.replicates.value_or(config.eval.replicates));
            std::cout << verdicts.size() << " verdicts written\n";
        } else if (report->parsed()) {
            std::cout << dump_pretty(pipeline.report()) << '\n';
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
