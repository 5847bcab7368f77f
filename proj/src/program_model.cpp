#include "taintchain/program_model.hpp"

#include "taintchain/pseudoc.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

namespace taintchain {

std::string to_string(Severity s) {
    switch (s) {
        case Severity::error: return "error";
        case Severity::warning: return "warning";
        case Severity::info: return "info";
    }
    return "error";
}

std::string to_string(const Diagnostic& d) {
    return to_string(d.severity) + ": " + (d.location.empty() ? "" : d.location + ": ") + d.message;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    return std::any_of(diags.begin(), diags.end(),
                       [](const Diagnostic& d) { return d.severity == Severity::error; });
}

bool FunctionRecord::is_variadic() const {
    return !params.empty() && (params.back().name == "..." || params.back().type == "...");
}

std::vector<std::string> FunctionRecord::param_names() const {
    std::vector<std::string> out;
    for (const auto& p : params) {
        if (p.name == "..." || p.type == "...") continue;
        out.push_back(p.name);
    }
    return out;
}

const FunctionRecord* ProgramExport::find_function(const std::string& id) const {
    for (const auto& f : functions) {
        if (f.id == id) return &f;
    }
    return nullptr;
}

const FunctionRecord* ProgramExport::resolve_callee(const std::string& callee) const {
    if (const auto* f = find_function(callee)) return f;
    for (const auto& f : functions) {
        if (f.name == callee) return &f;
    }
    return nullptr;
}

const ImportEntry* ProgramExport::find_import(const std::string& name) const {
    for (const auto& i : imports) {
        if (i.name == name) return &i;
    }
    return nullptr;
}

std::string to_string(Role r) { return r == Role::source ? "source" : "sink"; }

Role role_from_string(const std::string& s) {
    if (s == "source") return Role::source;
    if (s == "sink") return Role::sink;
    throw std::invalid_argument("unknown role '" + s + "'");
}

// ---------------------------------------------------------------------------
// ParamSelector

ParamSelector ParamSelector::index(int k) { return set({k}); }

ParamSelector ParamSelector::set(std::set<int> ks) {
    ParamSelector s;
    for (int k : ks) {
        if (k == 0) {
            s.returns_ = true;
        } else if (k < 0) {
            throw std::invalid_argument("parameter index must be >= 1");
        } else {
            s.indices_.insert(k);
        }
    }
    s.normalize();
    return s;
}

ParamSelector ParamSelector::all_from(int k) {
    if (k < 1) throw std::invalid_argument("parameter index must be >= 1");
    ParamSelector s;
    s.from_ = k;
    return s;
}

ParamSelector ParamSelector::return_value() {
    ParamSelector s;
    s.returns_ = true;
    return s;
}

void ParamSelector::normalize() {
    if (!from_) return;
    // absorb indices covered by, or contiguous with, the open range
    while (indices_.count(*from_ - 1) != 0) {
        indices_.erase(*from_ - 1);
        --*from_;
    }
    for (auto it = indices_.begin(); it != indices_.end();) {
        it = (*it >= *from_) ? indices_.erase(it) : std::next(it);
    }
}

bool ParamSelector::selects(int position) const {
    if (position == 0) return returns_;
    return indices_.count(position) != 0 || (from_ && position >= *from_);
}

std::vector<int> ParamSelector::positions(int arg_count) const {
    std::vector<int> out;
    for (int k = 1; k <= arg_count; ++k) {
        if (selects(k)) out.push_back(k);
    }
    return out;
}

ParamSelector ParamSelector::merged(const ParamSelector& other) const {
    ParamSelector s = *this;
    s.indices_.insert(other.indices_.begin(), other.indices_.end());
    if (other.from_) s.from_ = s.from_ ? std::min(*s.from_, *other.from_) : *other.from_;
    s.returns_ = s.returns_ || other.returns_;
    s.normalize();
    return s;
}

std::string ParamSelector::to_string() const {
    std::string out;
    auto add = [&](const std::string& part) {
        if (!out.empty()) out += ',';
        out += part;
    };
    for (int k : indices_) add(std::to_string(k));
    if (from_) add(">" + std::to_string(*from_ - 1));
    if (returns_) add("ret");
    return out;
}

ParamSelector ParamSelector::parse(const std::string& text) {
    ParamSelector s;
    std::stringstream ss(text);
    std::string part;
    bool any = false;
    while (std::getline(ss, part, ',')) {
        part.erase(std::remove_if(part.begin(), part.end(), [](char c) { return c == ' ' || c == '\t'; }),
                   part.end());
        if (part.empty()) continue;
        any = true;
        if (part == "ret" || part == "return" || part == "0") {
            s.returns_ = true;
            continue;
        }
        bool open = false;
        if (part[0] == '>') {
            open = true;
            part.erase(0, 1);
        }
        int k = 0;
        auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), k);
        if (ec != std::errc() || ptr != part.data() + part.size()) {
            throw std::invalid_argument("bad parameter selector '" + text + "'");
        }
        if (open) {
            if (k < 0) throw std::invalid_argument("bad parameter selector '" + text + "'");
            s.from_ = s.from_ ? std::min(*s.from_, k + 1) : k + 1;
        } else {
            if (k < 1) throw std::invalid_argument("parameter index must be >= 1 in '" + text + "'");
            s.indices_.insert(k);
        }
    }
    if (!any) throw std::invalid_argument("empty parameter selector");
    s.normalize();
    return s;
}

std::string to_string(const FuncSpec& s) { return "(" + s.name + "; " + s.selector.to_string() + ")"; }

std::string to_string(const VulnerableDestination& vd) {
    std::string args;
    for (std::size_t i = 0; i < vd.args.size(); ++i) {
        if (i) args += ", ";
        args += vd.args[i];
    }
    return "(" + std::to_string(vd.site_line) + "; " + vd.sink_name + "; " + args + ")";
}

std::string to_string(PromptKind k) {
    switch (k) {
        case PromptKind::start: return "start";
        case PromptKind::middle: return "middle";
        case PromptKind::end: return "end";
    }
    return "start";
}

PromptKind prompt_kind_from_string(const std::string& s) {
    if (s == "start") return PromptKind::start;
    if (s == "middle") return PromptKind::middle;
    if (s == "end") return PromptKind::end;
    throw std::invalid_argument("unknown prompt kind '" + s + "'");
}

std::string to_string(Vulnerability v) {
    switch (v) {
        case Vulnerability::yes: return "yes";
        case Vulnerability::no: return "no";
        case Vulnerability::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

Vulnerability vulnerability_from_string(const std::string& s) {
    if (s == "yes") return Vulnerability::yes;
    if (s == "no") return Vulnerability::no;
    if (s == "indeterminate") return Vulnerability::indeterminate;
    throw std::invalid_argument("unknown verdict '" + s + "'");
}

// ---------------------------------------------------------------------------
// Validation

std::vector<Diagnostic> validate_export(const ProgramExport& exp) {
    std::vector<Diagnostic> out;
    auto err = [&](std::string loc, std::string msg) {
        out.push_back({Severity::error, std::move(loc), std::move(msg)});
    };
    auto warn = [&](std::string loc, std::string msg) {
        out.push_back({Severity::warning, std::move(loc), std::move(msg)});
    };

    if (exp.schema_version != kSchemaVersion) {
        err("schema_version", "unsupported schema_version " + std::to_string(exp.schema_version) + " (expected " +
                                  std::to_string(kSchemaVersion) + ")");
    }

    std::map<std::string, int> seen;
    for (const auto& f : exp.functions) {
        if (f.id.empty()) {
            err("functions", "function with empty id");
            continue;
        }
        if (++seen[f.id] == 2) err("functions/" + f.id, "duplicate function id '" + f.id + "'");
    }

    for (const auto& f : exp.functions) {
        const std::string loc = "functions/" + f.id;
        for (std::size_t i = 0; i < f.params.size(); ++i) {
            if ((f.params[i].name == "..." || f.params[i].type == "...") && i + 1 != f.params.size()) {
                err(loc, "variadic marker must be the last parameter");
            }
        }
        if (f.body.find_first_not_of(" \t\r\n") == std::string::npos) {
            warn(loc, "function has no body; excluded from slicing");
            continue;
        }
        try {
            (void)pseudoc::parse_function(f.body);
        } catch (const pseudoc::ParseError& e) {
            warn(loc, std::string("unparseable body (line ") + std::to_string(e.line()) + "): " + e.what() +
                          "; excluded from slicing");
        }
    }

    std::map<std::string, int> import_seen;
    for (const auto& imp : exp.imports) {
        const std::string loc = "imports/" + imp.name;
        if (imp.name.empty()) err("imports", "import with empty name");
        if (++import_seen[imp.name] == 2) warn(loc, "duplicate import '" + imp.name + "'");
        if (imp.kind == Linkage::dynamic && imp.body) err(loc, "dynamic import must not carry a body");
    }

    for (std::size_t i = 0; i < exp.call_edges.size(); ++i) {
        const auto& e = exp.call_edges[i];
        const std::string loc = "call_edges/" + std::to_string(i);
        if (exp.find_function(e.caller) == nullptr) {
            err(loc, "caller '" + e.caller + "' does not resolve to a function");
        }
        if (e.line < 1) err(loc, "call edge line must be >= 1");
        if (e.callee == "<indirect>") continue;
        if (exp.resolve_callee(e.callee) == nullptr && exp.find_import(e.callee) == nullptr) {
            warn(loc, "unresolved callee '" + e.callee + "'");
        }
    }
    return out;
}

bool chain_is_adjacent(const ProgramExport& exp, const std::vector<std::string>& funcs) {
    for (std::size_t i = 0; i + 1 < funcs.size(); ++i) {
        const auto* callee = exp.find_function(funcs[i + 1]);
        if (callee == nullptr || exp.find_function(funcs[i]) == nullptr) return false;
        bool found = std::any_of(exp.call_edges.begin(), exp.call_edges.end(), [&](const CallEdge& e) {
            if (e.caller != funcs[i]) return false;
            const auto* r = exp.resolve_callee(e.callee);
            return r != nullptr && r->id == callee->id;
        });
        if (!found) return false;
    }
    return true;
}

}  // namespace taintchain
