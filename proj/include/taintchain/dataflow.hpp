#pragma once

// Flow-insensitive, path-insensitive intraprocedural data dependencies with a
// pointer-alias heuristic.
//
// Nodes are identifiers, parameter names and pointee nodes written "*p"
// (the region p points to). An edge a -> b means b depends on a. Edges are
// closed over alias classes: an edge into any member of a class is present
// as an edge into every member.

#include "taintchain/program_model.hpp"
#include "taintchain/pseudoc.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace taintchain::dataflow {

/// Known out-parameter effects of external callees: callee -> written
/// argument positions.
class EffectTable {
public:
    /// memcpy, memmove, strcpy, strncpy, strcat, strncat, sprintf, snprintf
    /// write argument 1.
    static EffectTable builtin();

    void set(const std::string& callee, ParamSelector writes) { table_[callee] = std::move(writes); }
    void add(const std::string& callee, const ParamSelector& writes);
    const ParamSelector* find(const std::string& callee) const;
    /// Sources write their selected arguments.
    void add_sources(const std::vector<FuncSpec>& sources);

    /// Lines of "name writes_arg k"; '#' starts a comment. Entries replace
    /// existing ones with the same name.
    void load_overrides(const std::string& text);
    void load_overrides_file(const std::filesystem::path& path);

    const std::map<std::string, ParamSelector>& entries() const { return table_; }

private:
    std::map<std::string, ParamSelector> table_;
};

struct DepEdge {
    std::string from;
    std::string to;
    int line = 0;
    bool operator==(const DepEdge&) const = default;
    auto operator<=>(const DepEdge&) const = default;
};

class DepGraph {
public:
    const std::vector<std::string>& params() const { return params_; }
    const std::set<std::string>& nodes() const { return nodes_; }
    const std::vector<DepEdge>& edges() const { return edges_; }
    const std::vector<std::vector<std::string>>& alias_classes() const { return classes_; }

    bool has_edge(const std::string& from, const std::string& to) const;
    /// Members of the alias class of `id` (just {id} when unaliased).
    std::vector<std::string> alias_class_of(const std::string& id) const;
    /// Closes a set of identifiers over alias classes.
    std::set<std::string> alias_closure(const std::set<std::string>& ids) const;
    /// Every node with a path to some seed, seeds included, alias closed.
    std::set<std::string> backward_reach(const std::set<std::string>& seeds) const;

private:
    friend DepGraph build_deps(const pseudoc::FunctionIR&, const EffectTable&, const std::vector<ParamDecl>&);

    std::vector<std::string> params_;
    std::set<std::string> nodes_;
    std::vector<DepEdge> edges_;
    std::vector<std::vector<std::string>> classes_;
    std::map<std::string, std::size_t> class_index_;
    std::map<std::string, std::set<std::string>> preds_;
};

/// Builds the dependency graph. `params` overrides the parameters parsed
/// from the function header when non-empty.
DepGraph build_deps(const pseudoc::FunctionIR& ir, const EffectTable& effects,
                    const std::vector<ParamDecl>& params = {});

/// Parameters with a directed path to any seed, in declaration order. A
/// parameter also counts when its pointee node "*p" is reached.
std::vector<std::string> depends_on_params(const DepGraph& dep, const std::set<std::string>& seeds);

/// Identifiers an argument expression contributes as slicing seeds.
std::set<std::string> seed_identifiers(const std::string& expr_text);
std::set<std::string> seed_identifiers(const pseudoc::Expr& e);

class BindingError : public std::runtime_error {
public:
    BindingError(std::size_t args, std::size_t params)
        : std::runtime_error("arity mismatch: " + std::to_string(args) + " argument(s) for " +
                             std::to_string(params) + " parameter(s)"),
          args_(args),
          params_(params) {}
    std::size_t arg_count() const { return args_; }
    std::size_t param_count() const { return params_; }

private:
    std::size_t args_;
    std::size_t params_;
};

/// Positional parameter -> argument map for the call to `callee` at
/// `site_line`. Variadic extras bind to vararg_1, vararg_2, ...; a
/// non-variadic call with fewer arguments than parameters is an error.
/// Throws std::out_of_range if no such call exists.
std::vector<ArgBinding> bind_arguments(const pseudoc::FunctionIR& caller_ir, int site_line, const std::string& callee,
                                       const std::vector<std::string>& callee_params, bool variadic);

}  // namespace taintchain::dataflow
