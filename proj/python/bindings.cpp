#include "taintchain/flowgen.hpp"
#include "taintchain/ingest.hpp"
#include "taintchain/json_io.hpp"
#include "taintchain/oracle.hpp"
#include "taintchain/pipeline.hpp"
#include "taintchain/promptchat.hpp"
#include "taintchain/report.hpp"
#include "taintchain/slicer.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace taintchain;

// JSON text crosses the boundary; the Python package decodes it.

namespace {

ProgramExport parse_export(const std::string& text) { return ingest::load_text(text).program; }

ProgramIndex index_for(const ProgramExport& exp, const std::vector<FuncSpec>& sources) {
    auto effects = dataflow::EffectTable::builtin();
    effects.add_sources(sources);
    return ProgramIndex(exp, effects);
}

std::string validate(const std::string& text) {
    json out = json::array();
    try {
        auto decoded = decode_export(json::parse(text));
        for (const auto& d : decoded.diagnostics) out.push_back(d);
        for (const auto& d : validate_export(decoded.program)) out.push_back(d);
    } catch (const json::parse_error& e) {
        out.push_back(Diagnostic{Severity::error, "<document>", std::string("malformed JSON: ") + e.what()});
    } catch (const SchemaError& e) {
        out.push_back(Diagnostic{Severity::error, e.field(), e.what()});
    }
    return out.dump();
}

std::string load(const std::filesystem::path& path) {
    auto loaded = ingest::load(path);
    return json{{"program", encode_export(loaded.program)}, {"diagnostics", loaded.diagnostics}}.dump();
}

std::string locate_vds(const std::string& export_text, const std::string& sinks) {
    auto exp = parse_export(export_text);
    return json(slicer::locate_vds(index_for(exp, {}), oracle::parse_spec_list(sinks, Role::sink))).dump();
}

std::string backward_slice(const std::string& export_text, const std::string& vd_text, const std::string& sources,
                           int depth_limit) {
    auto exp = parse_export(export_text);
    auto index = index_for(exp, oracle::parse_spec_list(sources, Role::source));
    auto result = slicer::backward_slice(index, json::parse(vd_text).get<VulnerableDestination>(), {depth_limit, false});
    return json{{"chains", result.chains}, {"diagnostics", result.diagnostics}}.dump();
}

std::string dangerous_flows(const std::string& export_text, const std::string& chains_text, const std::string& sources,
                            const std::string& subject) {
    auto exp = parse_export(export_text);
    auto specs = oracle::parse_spec_list(sources, Role::source);
    auto flows = flowgen::dedup(
        flowgen::match_sources(index_for(exp, specs), json::parse(chains_text).get<std::vector<CallChain>>(), specs));
    flowgen::assign_ids(flows, subject.empty() ? exp.name : subject);
    return json(flows).dump();
}

std::string prompt_sequence(const std::string& export_text, const std::string& flow_text) {
    return json(promptchat::build_prompt_sequence(json::parse(flow_text).get<DangerousFlow>(), parse_export(export_text)))
        .dump();
}

py::tuple extract_verdict(const std::string& reply) {
    auto e = promptchat::extract_verdict(reply);
    return py::make_tuple(to_string(e.vulnerable), e.cwe_tags);
}

std::string score(const std::string& verdicts_text, const std::string& labels_text) {
    auto verdicts = json::parse(verdicts_text).get<std::vector<Verdict>>();
    return report::to_json(report::score(verdicts, report::parse_labels(json::parse(labels_text)))).dump();
}

pipeline::Settings settings_from(const json& o) {
    pipeline::Settings s;
    auto path = [&](const char* key) -> std::optional<std::filesystem::path> {
        if (!o.contains(key) || o[key].is_null()) return std::nullopt;
        return std::filesystem::path(o[key].get<std::string>());
    };
    s.depth_limit = o.value("depth_limit", s.depth_limit);
    s.temperature = o.value("temperature", s.temperature);
    s.backend = o.value("backend", s.backend);
    s.rounds = o.value("rounds", s.rounds);
    s.jobs = o.value("jobs", s.jobs);
    s.mock_script = path("mock_script");
    s.sources_file = path("sources_file");
    s.sinks_file = path("sinks_file");
    s.cache_file = path("cache");
    s.corrections_file = path("corrections");
    s.effects_file = path("effects");
    s.labels_file = path("labels");
    s.http.base_url = o.value("base_url", s.http.base_url);
    s.http.model = o.value("model", s.http.model);
    s.http.temperature = s.temperature;
    return s;
}

void run(const std::vector<std::filesystem::path>& exports, const std::filesystem::path& out_dir,
         const std::string& options) {
    pipeline::Session session(settings_from(json::parse(options)));
    py::gil_scoped_release release;
    pipeline::run(pipeline::expand_inputs(exports), out_dir, session);
    session.save_cache();
}

std::string score_run(const std::filesystem::path& run_dir, const std::filesystem::path& labels) {
    return pipeline::to_json(pipeline::score_run(run_dir, report::load_labels(labels))).dump();
}

}  // namespace

PYBIND11_MODULE(_taintchain, m) {
    m.doc() = "Native core of the taintchain package";
    py::register_exception<ingest::LoadError>(m, "LoadError", PyExc_ValueError);
    py::register_exception<report::ScoringError>(m, "ScoringError", PyExc_ValueError);
    py::register_exception<promptchat::PromptError>(m, "PromptError", PyExc_ValueError);

    m.def("validate", &validate, py::arg("export_json"));
    m.def("load", &load, py::arg("path"));
    m.def("locate_vds", &locate_vds, py::arg("export_json"), py::arg("sinks"));
    m.def("backward_slice", &backward_slice, py::arg("export_json"), py::arg("vd_json"), py::arg("sources"),
          py::arg("depth_limit") = kDefaultDepthLimit);
    m.def("dangerous_flows", &dangerous_flows, py::arg("export_json"), py::arg("chains_json"), py::arg("sources"),
          py::arg("subject") = "");
    m.def("prompt_sequence", &prompt_sequence, py::arg("export_json"), py::arg("flow_json"));
    m.def("extract_verdict", &extract_verdict, py::arg("reply"));
    m.def("score", &score, py::arg("verdicts_json"), py::arg("labels_json"));
    m.def("run", &run, py::arg("exports"), py::arg("out_dir"), py::arg("options_json") = "{}");
    m.def("score_run", &score_run, py::arg("run_dir"), py::arg("labels"));
}
