#pragma once

#include "taintchain/program_model.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace taintchain::ingest {

/// Fatal problem loading an export: IO failure, schema violation or an
/// invariant violation. Carries the first fatal diagnostic.
class LoadError : public std::runtime_error {
public:
    explicit LoadError(Diagnostic d) : std::runtime_error(to_string(d)), diagnostic_(std::move(d)) {}
    const Diagnostic& diagnostic() const { return diagnostic_; }

private:
    Diagnostic diagnostic_;
};

struct LoadedExport {
    ProgramExport program;
    std::vector<Diagnostic> diagnostics;  // non-fatal
};

LoadedExport load(const std::filesystem::path& path);
LoadedExport load_text(const std::string& text, const std::string& origin = "<memory>");

struct GraphEdge {
    std::string caller;
    std::string callee;  // function id when internal, otherwise the external name
    int line = 0;
    bool internal = false;

    bool operator==(const GraphEdge&) const = default;
    auto operator<=>(const GraphEdge&) const = default;
};

struct CallerSite {
    std::string caller;
    int line = 0;
    bool operator==(const CallerSite&) const = default;
    auto operator<=>(const CallerSite&) const = default;
};

class CallGraph {
public:
    const std::vector<std::string>& nodes() const { return nodes_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

    /// Callers of `callee` (function id or external name), sorted.
    const std::vector<CallerSite>& callers_of(const std::string& callee) const;
    std::vector<GraphEdge> edges_from(const std::string& caller) const;
    const std::map<std::string, std::vector<CallerSite>>& reverse_index() const { return reverse_; }

    bool has_edge(const std::string& caller, const std::string& callee) const;
    /// True iff every consecutive pair of the chain is an edge of the graph.
    bool is_adjacent(const std::vector<std::string>& chain) const;

private:
    friend CallGraph build_call_graph(const ProgramExport& exp);

    std::vector<std::string> nodes_;
    std::vector<GraphEdge> edges_;
    std::map<std::string, std::vector<CallerSite>> reverse_;
    std::vector<Diagnostic> diagnostics_;
};

/// One edge per recognized call site in each parseable body, unioned with
/// the export's call_edges. Calls through anything but a plain name become
/// external edges named "<indirect>".
CallGraph build_call_graph(const ProgramExport& exp);

}  // namespace taintchain::ingest
