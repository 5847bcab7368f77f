#include "taintchain/ingest.hpp"

#include "taintchain/json_io.hpp"
#include "taintchain/pseudoc.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace taintchain::ingest {

namespace {

LoadedExport finish_load(const json& j, const std::string& origin) {
    DecodedExport decoded;
    try {
        decoded = decode_export(j);
    } catch (const SchemaError& e) {
        throw LoadError({Severity::error, origin + ":" + e.field(), e.what()});
    }
    LoadedExport out;
    out.diagnostics = std::move(decoded.diagnostics);
    for (auto& d : validate_export(decoded.program)) {
        if (d.severity == Severity::error) {
            d.location = origin + ":" + d.location;
            throw LoadError(std::move(d));
        }
        out.diagnostics.push_back(std::move(d));
    }
    out.program = std::move(decoded.program);
    return out;
}

}  // namespace

LoadedExport load(const std::filesystem::path& path) {
    json j;
    try {
        j = read_json_file(path);
    } catch (const SchemaError& e) {
        throw LoadError({Severity::error, path.string(), e.what()});
    } catch (const std::exception& e) {
        throw LoadError({Severity::error, path.string(), std::string("IO failure: ") + e.what()});
    }
    return finish_load(j, path.string());
}

LoadedExport load_text(const std::string& text, const std::string& origin) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw LoadError({Severity::error, origin, "empty document"});
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError({Severity::error, origin, std::string("malformed JSON: ") + e.what()});
    }
    return finish_load(j, origin);
}

const std::vector<CallerSite>& CallGraph::callers_of(const std::string& callee) const {
    static const std::vector<CallerSite> kNone;
    auto it = reverse_.find(callee);
    return it == reverse_.end() ? kNone : it->second;
}

std::vector<GraphEdge> CallGraph::edges_from(const std::string& caller) const {
    std::vector<GraphEdge> out;
    for (const auto& e : edges_) {
        if (e.caller == caller) out.push_back(e);
    }
    return out;
}

bool CallGraph::has_edge(const std::string& caller, const std::string& callee) const {
    return std::any_of(edges_.begin(), edges_.end(),
                       [&](const GraphEdge& e) { return e.caller == caller && e.callee == callee; });
}

bool CallGraph::is_adjacent(const std::vector<std::string>& chain) const {
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        if (!has_edge(chain[i], chain[i + 1])) return false;
    }
    return true;
}

CallGraph build_call_graph(const ProgramExport& exp) {
    CallGraph g;
    std::set<std::string> unparseable;
    std::set<std::tuple<std::string, std::string, int>> seen;

    auto resolve = [&](const std::string& name) -> std::pair<std::string, bool> {
        if (name == "<indirect>") return {name, false};
        if (const auto* f = exp.resolve_callee(name)) return {f->id, true};
        return {name, false};
    };

    for (const auto& f : exp.functions) {
        g.nodes_.push_back(f.id);
        if (f.body.find_first_not_of(" \t\r\n") == std::string::npos) {
            unparseable.insert(f.id);
            continue;
        }
        pseudoc::FunctionIR ir;
        try {
            ir = pseudoc::parse_function(f.body);
        } catch (const pseudoc::ParseError&) {
            unparseable.insert(f.id);
            continue;
        }
        for (const auto& site : pseudoc::all_call_sites(ir)) {
            auto [callee, internal] = resolve(site.callee);
            seen.insert({f.id, callee, site.line});
            g.edges_.push_back({f.id, callee, site.line, internal});
        }
    }

    for (const auto& e : exp.call_edges) {
        auto [callee, internal] = resolve(e.callee);
        if (seen.count({e.caller, callee, e.line}) != 0) continue;
        if (unparseable.count(e.caller) == 0 && exp.find_function(e.caller) != nullptr) {
            g.diagnostics_.push_back({Severity::warning, "call_edges/" + e.caller,
                                      "edge to '" + e.callee + "' at line " + std::to_string(e.line) +
                                          " not found in parsed body; kept"});
        }
        seen.insert({e.caller, callee, e.line});
        g.edges_.push_back({e.caller, callee, e.line, internal});
    }

    std::sort(g.edges_.begin(), g.edges_.end());
    for (const auto& e : g.edges_) g.reverse_[e.callee].push_back({e.caller, e.line});
    for (auto& [_, callers] : g.reverse_) std::sort(callers.begin(), callers.end());
    return g;
}

}  // namespace taintchain::ingest
