#pragma once

// Domain types shared by every stage of the pipeline. All of them are plain
// values: immutable once built and safe to share between worker threads.

#include <compare>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace taintchain {

inline constexpr int kSchemaVersion = 1;
inline constexpr int kDefaultDepthLimit = 50;

enum class Severity { error, warning, info };

struct Diagnostic {
    Severity severity = Severity::error;
    std::string location;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

std::string to_string(Severity s);
std::string to_string(const Diagnostic& d);
bool has_errors(const std::vector<Diagnostic>& diags);

struct ParamDecl {
    std::string name;
    std::string type;
    bool operator==(const ParamDecl&) const = default;
};

struct FunctionRecord {
    std::string id;
    std::string name;
    std::vector<ParamDecl> params;  // call-site argument order
    std::string body;               // decompiled pseudo-C, line 1 = first line
    std::optional<std::string> entry_address;

    bool is_variadic() const;
    /// Parameter names without the trailing "..." marker.
    std::vector<std::string> param_names() const;

    bool operator==(const FunctionRecord&) const = default;
};

enum class Linkage { dynamic, static_linked };

struct ImportEntry {
    std::string name;
    Linkage kind = Linkage::dynamic;
    std::optional<std::string> body;  // only for statically linked functions
    bool operator==(const ImportEntry&) const = default;
};

struct CallEdge {
    std::string caller;  // function id
    std::string callee;  // function id/name or external name
    int line = 0;
    bool operator==(const CallEdge&) const = default;
};

struct ProgramExport {
    std::string name;
    int schema_version = kSchemaVersion;
    std::vector<FunctionRecord> functions;
    std::vector<ImportEntry> imports;
    std::vector<CallEdge> call_edges;

    const FunctionRecord* find_function(const std::string& id) const;
    /// Resolves a callee reference (function id first, then name).
    const FunctionRecord* resolve_callee(const std::string& callee) const;
    const ImportEntry* find_import(const std::string& name) const;

    bool operator==(const ProgramExport&) const = default;
};

enum class Role { source, sink };
std::string to_string(Role r);
Role role_from_string(const std::string& s);

/// Which call positions a source or sink cares about. Positions are 1-based;
/// 0 denotes the return value.
class ParamSelector {
public:
    ParamSelector() = default;

    static ParamSelector index(int k);
    static ParamSelector set(std::set<int> ks);
    /// Every position >= k.
    static ParamSelector all_from(int k);
    /// Every position > k, the "(f; >k)" notation.
    static ParamSelector after(int k) { return all_from(k + 1); }
    static ParamSelector return_value();

    bool selects(int position) const;
    bool selects_return() const { return returns_; }
    bool empty() const { return indices_.empty() && !from_ && !returns_; }
    const std::set<int>& indices() const { return indices_; }
    std::optional<int> from() const { return from_; }

    /// Positions selected among `arg_count` actual arguments.
    std::vector<int> positions(int arg_count) const;

    ParamSelector merged(const ParamSelector& other) const;

    /// Compact text: "1", "1,3", ">2", "ret", or combinations "1,>3,ret".
    std::string to_string() const;
    /// Parses the compact text above. Throws std::invalid_argument.
    static ParamSelector parse(const std::string& text);

    bool operator==(const ParamSelector&) const = default;
    auto operator<=>(const ParamSelector&) const = default;

private:
    void normalize();

    std::set<int> indices_;
    std::optional<int> from_;
    bool returns_ = false;
};

struct FuncSpec {
    std::string name;
    Role role = Role::sink;
    ParamSelector selector;

    bool operator==(const FuncSpec&) const = default;
};

std::string to_string(const FuncSpec& s);  // "(name; selector)"

struct VulnerableDestination {
    std::string function_id;
    int site_line = 0;
    std::string sink_name;
    std::vector<std::string> args;       // non-constant selected argument texts
    std::vector<int> arg_positions;      // 1-based positions of `args`

    bool operator==(const VulnerableDestination&) const = default;
    auto operator<=>(const VulnerableDestination&) const = default;
};

std::string to_string(const VulnerableDestination& vd);  // "(line; sink; a, b)"

struct ArgBinding {
    std::string param;
    std::string arg;  // argument expression text at the call site
    bool operator==(const ArgBinding&) const = default;
};

/// One element of a call chain and how data reaches it.
struct ChainStep {
    std::string function_id;
    std::vector<int> call_lines;         // lines calling the next element (the VD line for the last)
    std::vector<ArgBinding> bindings;    // argument -> parameter of the next element
    std::vector<std::string> seeds;      // identifiers whose origins are traced here
    std::vector<std::string> reach;      // backward-reachable identifiers (alias closed)
    std::vector<std::string> dependent_params;

    bool operator==(const ChainStep&) const = default;
};

struct CallChain {
    std::vector<std::string> funcs;  // f1 .. fn, fn hosts the VD
    VulnerableDestination vd;
    std::vector<ChainStep> binding_trace;  // parallel to funcs

    bool operator==(const CallChain&) const = default;
};

struct SourceCall {
    std::string function_id;
    int site_line = 0;
    FuncSpec spec;
    std::vector<std::string> tainted_args;
    std::vector<int> positions;  // 1-based; 0 for the return value

    bool operator==(const SourceCall&) const = default;
};

struct DangerousFlow {
    std::string id;  // assigned after deduplication
    CallChain chain;
    std::vector<SourceCall> source_calls;

    bool operator==(const DangerousFlow&) const = default;
};

enum class PromptKind { start, middle, end };
std::string to_string(PromptKind k);
PromptKind prompt_kind_from_string(const std::string& s);

struct Prompt {
    PromptKind kind = PromptKind::start;
    std::string text;
    bool operator==(const Prompt&) const = default;
};

struct PromptSequence {
    std::string df_id;
    std::vector<Prompt> prompts;
    bool operator==(const PromptSequence&) const = default;
};

struct ChatMessage {
    std::string role;  // "user" | "assistant" | "system"
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ModelParams {
    std::string model;
    double temperature = 0.5;
    std::string timestamp;
    bool operator==(const ModelParams&) const = default;
};

struct Transcript {
    std::vector<ChatMessage> messages;
    ModelParams params;
    int retries = 0;
    std::string note;
    bool operator==(const Transcript&) const = default;
};

enum class Vulnerability { yes, no, indeterminate };
std::string to_string(Vulnerability v);
Vulnerability vulnerability_from_string(const std::string& s);

struct Verdict {
    std::string df_id;
    std::string subject;
    Vulnerability vulnerable = Vulnerability::indeterminate;
    std::vector<std::string> cwe_tags;
    Transcript transcript;

    bool operator==(const Verdict&) const = default;
};

/// Structural validation of an export. Returns an empty list iff every
/// invariant holds.
std::vector<Diagnostic> validate_export(const ProgramExport& exp);

/// True iff every consecutive pair (f_i, f_i+1) is a caller/callee pair in
/// the export's call_edges.
bool chain_is_adjacent(const ProgramExport& exp, const std::vector<std::string>& funcs);

}  // namespace taintchain
