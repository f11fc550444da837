#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ontorag/chunker.hpp"
#include "ontorag/community.hpp"
#include "ontorag/elements.hpp"
#include "ontorag/errors.hpp"
#include "ontorag/evalkit.hpp"
#include "ontorag/pipeline.hpp"
#include "ontorag/tokenizer.hpp"

namespace py = pybind11;
using namespace ontorag;

namespace {

py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_python(const py::handle& o) {
    return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<Stage> stages_from(const std::vector<std::string>& names) {
    if (names.empty()) return all_stages();
    std::vector<Stage> out;
    for (const auto& n : names) out.push_back(stage_from_string(n));
    return out;
}

py::tuple bbox_tuple(const BBox& b) { return py::make_tuple(b.x0, b.y0, b.x1, b.y1); }

BBox bbox_from(const std::array<double, 4>& a) { return BBox{a[0], a[1], a[2], a[3]}; }

/// Pipeline bound to one workdir; releases the GIL during long stages.
class PyPipeline {
public:
    PyPipeline(const std::string& config, std::optional<std::string> workdir, std::optional<std::uint64_t> seed,
               bool log)
        : pipeline_(load_config(config, workdir ? std::optional<std::filesystem::path>(*workdir) : std::nullopt, seed),
                    Logger(log)) {}

    py::object run(const std::vector<std::string>& stages) {
        StageManifest m;
        {
            py::gil_scoped_release release;
            m = pipeline_.run(stages_from(stages));
        }
        return to_python(to_json(m));
    }

    py::object query(const std::string& question, std::optional<int> level, std::optional<std::size_t> top_k,
                     std::optional<std::size_t> window, std::optional<std::size_t> max_context) {
        RetrievalConfig r = pipeline_.config().retrieval;
        if (level) r.level = *level;
        if (top_k) r.top_k_classes = *top_k;
        if (window) r.context_window_tokens = *window;
        if (max_context) r.max_context_tokens = *max_context;
        QueryResult result;
        {
            py::gil_scoped_release release;
            result = pipeline_.query(question, r);
        }
        return to_python(to_json(result));
    }

    py::list generate_questions() {
        py::list out;
        for (const auto& q : pipeline_.generate_questions()) out.append(to_python(to_json(q)));
        return out;
    }

    void run_conditions(const std::vector<std::string>& conditions) {
        py::gil_scoped_release release;
        pipeline_.run_conditions(conditions.empty() ? pipeline_.config().eval.conditions : conditions);
    }

    py::list judge(const std::vector<std::string>& metrics, std::optional<std::size_t> replicates) {
        std::vector<Metric> ms;
        for (const auto& m : metrics) ms.push_back(metric_from_string(m));
        if (ms.empty()) ms = pipeline_.config().eval.metrics;
        std::vector<JudgeVerdict> verdicts;
        {
            py::gil_scoped_release release;
            verdicts = pipeline_.judge(ms, replicates.value_or(pipeline_.config().eval.replicates));
        }
        py::list out;
        for (const auto& v : verdicts) out.append(to_python(to_json(v)));
        return out;
    }

    py::object report() { return to_python(pipeline_.report()); }

    std::string workdir() const { return pipeline_.config().workdir.string(); }

private:
    Pipeline pipeline_;
};

}  // namespace

PYBIND11_MODULE(_ontorag, m) {
    m.doc() = "Ontology-driven retrieval pipeline";

    auto base = py::register_exception<Error>(m, "OntoragError");
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ProviderError>(m, "ProviderError", base.ptr());
    py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
    py::register_exception<ParseError>(m, "ParseError", base.ptr());

    m.def("count_tokens", [](const std::string& s) { return count_tokens(s); });
    m.def("tokens", [](const std::string& s, bool lowercase, bool drop_punctuation) {
        return token_strings(s, lowercase, drop_punctuation);
    }, py::arg("text"), py::arg("lowercase") = false, py::arg("drop_punctuation") = false);

    m.def("transform_coords", [](const std::array<double, 4>& b, double source_units, double target_units) {
        return bbox_tuple(transform_coords(bbox_from(b), source_units, target_units));
    }, py::arg("bbox"), py::arg("source_units"), py::arg("target_units"));
    m.def("pad_region", [](const std::array<double, 4>& b, const std::array<double, 4>& page, double pad_h,
                           double pad_v) { return bbox_tuple(pad_region(bbox_from(b), bbox_from(page), pad_h, pad_v)); },
          py::arg("bbox"), py::arg("page"), py::arg("pad_h") = 20.0, py::arg("pad_v") = 100.0);

    m.def("hybrid_chunk", [](const std::string& elements_jsonl, std::size_t min_tokens, std::size_t max_tokens) {
        ChunkingConfig c;
        c.min_tokens = min_tokens;
        c.max_tokens = max_tokens;
        const auto elements = parse_elements(elements_jsonl);
        py::list out;
        for (const auto& chunk : hybrid_chunk(elements, c)) out.append(to_python(to_json(chunk)));
        return out;
    }, py::arg("elements_jsonl"), py::arg("min_tokens") = 200, py::arg("max_tokens") = 1000);

    m.def("modularity", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                           const std::vector<std::size_t>& membership, double resolution) {
        return modularity(UndirectedGraph(n, edges), Partition::from_membership(membership), resolution);
    }, py::arg("n"), py::arg("edges"), py::arg("membership"), py::arg("resolution") = 1.0);
    m.def("leiden", [](std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                       double resolution, std::uint64_t seed) {
        return leiden(UndirectedGraph(n, edges), resolution, seed).membership;
    }, py::arg("n"), py::arg("edges"), py::arg("resolution") = 1.0, py::arg("seed") = 42);

    m.def("rouge_l_distance", &rouge_l_distance, py::arg("a"), py::arg("b"));
    m.def("cluster_claims", [](const std::vector<std::string>& claims, double threshold) {
        return cluster_claims(claims, threshold).clusters;
    }, py::arg("claims"), py::arg("threshold") = 0.5);
    m.def("win_rates", [](const py::list& verdicts) {
        std::vector<JudgeVerdict> vs;
        for (const auto& v : verdicts) vs.push_back(verdict_from_json(from_python(v)));
        return to_python(to_json(win_rates(vs)));
    }, py::arg("verdicts"));

    m.def("validate_artifacts", [](const std::string& workdir) { return validate_artifacts(workdir).violations; },
          py::arg("workdir"));
    m.def("stage_names", [] {
        std::vector<std::string> out;
        for (Stage s : all_stages()) out.push_back(to_string(s));
        return out;
    });

    py::class_<PyPipeline>(m, "Pipeline")
        .def(py::init<const std::string&, std::optional<std::string>, std::optional<std::uint64_t>, bool>(),
             py::arg("config"), py::arg("workdir") = py::none(), py::arg("seed") = py::none(), py::arg("log") = false)
        .def_property_readonly("workdir", &PyPipeline::workdir)
        .def("run", &PyPipeline::run, py::arg("stages") = std::vector<std::string>{})
        .def("query", &PyPipeline::query, py::arg("question"), py::arg("level") = py::none(),
             py::arg("top_k") = py::none(), py::arg("window") = py::none(), py::arg("max_context") = py::none())
        .def("generate_questions", &PyPipeline::generate_questions)
        .def("run_conditions", &PyPipeline::run_conditions, py::arg("conditions") = std::vector<std::string>{})
        .def("judge", &PyPipeline::judge, py::arg("metrics") = std::vector<std::string>{},
             py::arg("replicates") = py::none())
        .def("report", &PyPipeline::report);
}
