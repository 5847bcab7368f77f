#include "taintchain/json_io.hpp"

#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace taintchain {

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "/" + key, "missing required field");
    return *it;
}

std::string require_string(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_string()) throw SchemaError(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

int require_int(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer()) throw SchemaError(path + "/" + key, "expected an integer");
    return v.get<int>();
}

const json& require_array(const json& obj, const std::string& key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_array()) throw SchemaError(path + "/" + key, "expected an array");
    return v;
}

void check_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path.empty() ? "/" : path, "expected an object");
}

void warn_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& path,
                  std::vector<Diagnostic>& diags) {
    std::set<std::string> names(known.begin(), known.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (names.count(it.key()) == 0) {
            diags.push_back({Severity::warning, path + "/" + it.key(), "unknown field ignored"});
        }
    }
}

}  // namespace

DecodedExport decode_export(const json& j) {
    DecodedExport out;
    auto& p = out.program;
    auto& diags = out.diagnostics;
    check_object(j, "");
    warn_unknown(j, {"name", "schema_version", "functions", "imports", "call_edges"}, "", diags);
    p.name = require_string(j, "name", "");
    p.schema_version = require_int(j, "schema_version", "");
    if (p.schema_version != kSchemaVersion) {
        throw SchemaError("/schema_version", "unsupported schema_version " + std::to_string(p.schema_version));
    }

    const json& funcs = require_array(j, "functions", "");
    for (std::size_t i = 0; i < funcs.size(); ++i) {
        const std::string path = "/functions/" + std::to_string(i);
        const json& fj = funcs[i];
        check_object(fj, path);
        warn_unknown(fj, {"id", "name", "params", "body", "entry_address"}, path, diags);
        FunctionRecord f;
        f.id = require_string(fj, "id", path);
        f.name = require_string(fj, "name", path);
        const json& params = require_array(fj, "params", path);
        for (std::size_t k = 0; k < params.size(); ++k) {
            const std::string ppath = path + "/params/" + std::to_string(k);
            check_object(params[k], ppath);
            warn_unknown(params[k], {"name", "type"}, ppath, diags);
            ParamDecl pd;
            pd.name = require_string(params[k], "name", ppath);
            pd.type = require_string(params[k], "type", ppath);
            f.params.push_back(std::move(pd));
        }
        if (auto it = fj.find("body"); it != fj.end() && !it->is_null()) {
            if (!it->is_string()) throw SchemaError(path + "/body", "expected a string");
            f.body = it->get<std::string>();
        }
        if (auto it = fj.find("entry_address"); it != fj.end() && !it->is_null()) {
            if (!it->is_string()) throw SchemaError(path + "/entry_address", "expected a string");
            f.entry_address = it->get<std::string>();
        }
        p.functions.push_back(std::move(f));
    }

    const json& imports = require_array(j, "imports", "");
    for (std::size_t i = 0; i < imports.size(); ++i) {
        const std::string path = "/imports/" + std::to_string(i);
        const json& ij = imports[i];
        check_object(ij, path);
        warn_unknown(ij, {"name", "kind", "body"}, path, diags);
        ImportEntry imp;
        imp.name = require_string(ij, "name", path);
        const std::string kind = require_string(ij, "kind", path);
        if (kind == "dynamic") {
            imp.kind = Linkage::dynamic;
        } else if (kind == "static") {
            imp.kind = Linkage::static_linked;
        } else {
            throw SchemaError(path + "/kind", "expected 'dynamic' or 'static'");
        }
        if (auto it = ij.find("body"); it != ij.end() && !it->is_null()) {
            if (!it->is_string()) throw SchemaError(path + "/body", "expected a string");
            imp.body = it->get<std::string>();
        }
        p.imports.push_back(std::move(imp));
    }

    const json& edges = require_array(j, "call_edges", "");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const std::string path = "/call_edges/" + std::to_string(i);
        const json& ej = edges[i];
        check_object(ej, path);
        warn_unknown(ej, {"caller", "callee", "line"}, path, diags);
        CallEdge e;
        e.caller = require_string(ej, "caller", path);
        e.callee = require_string(ej, "callee", path);
        e.line = require_int(ej, "line", path);
        p.call_edges.push_back(std::move(e));
    }
    return out;
}

json encode_export(const ProgramExport& exp) {
    json j;
    j["name"] = exp.name;
    j["schema_version"] = exp.schema_version;
    j["functions"] = json::array();
    for (const auto& f : exp.functions) {
        json fj;
        fj["id"] = f.id;
        fj["name"] = f.name;
        fj["params"] = json::array();
        for (const auto& p : f.params) fj["params"].push_back({{"name", p.name}, {"type", p.type}});
        fj["body"] = f.body;
        if (f.entry_address) fj["entry_address"] = *f.entry_address;
        j["functions"].push_back(std::move(fj));
    }
    j["imports"] = json::array();
    for (const auto& i : exp.imports) {
        json ij;
        ij["name"] = i.name;
        ij["kind"] = i.kind == Linkage::dynamic ? "dynamic" : "static";
        if (i.body) ij["body"] = *i.body;
        j["imports"].push_back(std::move(ij));
    }
    j["call_edges"] = json::array();
    for (const auto& e : exp.call_edges) {
        j["call_edges"].push_back({{"caller", e.caller}, {"callee", e.callee}, {"line", e.line}});
    }
    return j;
}

void to_json(json& j, const Diagnostic& d) {
    j = json{{"severity", to_string(d.severity)}, {"location", d.location}, {"message", d.message}};
}

void from_json(const json& j, Diagnostic& d) {
    const auto sev = j.at("severity").get<std::string>();
    d.severity = sev == "error" ? Severity::error : sev == "warning" ? Severity::warning : Severity::info;
    d.location = j.at("location").get<std::string>();
    d.message = j.at("message").get<std::string>();
}

void to_json(json& j, const FuncSpec& s) {
    j = json{{"name", s.name}, {"role", to_string(s.role)}, {"selector", s.selector.to_string()}};
}

void from_json(const json& j, FuncSpec& s) {
    s.name = j.at("name").get<std::string>();
    s.role = role_from_string(j.at("role").get<std::string>());
    s.selector = ParamSelector::parse(j.at("selector").get<std::string>());
}

void to_json(json& j, const VulnerableDestination& vd) {
    j = json{{"function", vd.function_id},
             {"line", vd.site_line},
             {"sink", vd.sink_name},
             {"args", vd.args},
             {"arg_positions", vd.arg_positions}};
}

void from_json(const json& j, VulnerableDestination& vd) {
    vd.function_id = j.at("function").get<std::string>();
    vd.site_line = j.at("line").get<int>();
    vd.sink_name = j.at("sink").get<std::string>();
    vd.args = j.at("args").get<std::vector<std::string>>();
    vd.arg_positions = j.value("arg_positions", std::vector<int>{});
}

void to_json(json& j, const ArgBinding& b) { j = json{{"param", b.param}, {"arg", b.arg}}; }

void from_json(const json& j, ArgBinding& b) {
    b.param = j.at("param").get<std::string>();
    b.arg = j.at("arg").get<std::string>();
}

void to_json(json& j, const ChainStep& s) {
    j = json{{"function", s.function_id}, {"call_lines", s.call_lines},   {"bindings", s.bindings},
             {"seeds", s.seeds},          {"reach", s.reach},             {"dependent_params", s.dependent_params}};
}

void from_json(const json& j, ChainStep& s) {
    s.function_id = j.at("function").get<std::string>();
    s.call_lines = j.at("call_lines").get<std::vector<int>>();
    s.bindings = j.at("bindings").get<std::vector<ArgBinding>>();
    s.seeds = j.at("seeds").get<std::vector<std::string>>();
    s.reach = j.at("reach").get<std::vector<std::string>>();
    s.dependent_params = j.at("dependent_params").get<std::vector<std::string>>();
}

void to_json(json& j, const CallChain& c) {
    j = json{{"funcs", c.funcs}, {"vd", c.vd}, {"binding_trace", c.binding_trace}};
}

void from_json(const json& j, CallChain& c) {
    c.funcs = j.at("funcs").get<std::vector<std::string>>();
    c.vd = j.at("vd").get<VulnerableDestination>();
    c.binding_trace = j.at("binding_trace").get<std::vector<ChainStep>>();
}

void to_json(json& j, const SourceCall& s) {
    j = json{{"function", s.function_id},
             {"line", s.site_line},
             {"spec", s.spec},
             {"tainted_args", s.tainted_args},
             {"positions", s.positions}};
}

void from_json(const json& j, SourceCall& s) {
    s.function_id = j.at("function").get<std::string>();
    s.site_line = j.at("line").get<int>();
    s.spec = j.at("spec").get<FuncSpec>();
    s.tainted_args = j.at("tainted_args").get<std::vector<std::string>>();
    s.positions = j.at("positions").get<std::vector<int>>();
}

void to_json(json& j, const DangerousFlow& df) {
    j = json{{"id", df.id},
             {"chain", df.chain.funcs},
             {"vd", df.chain.vd},
             {"binding_trace", df.chain.binding_trace},
             {"sources", df.source_calls}};
}

void from_json(const json& j, DangerousFlow& df) {
    df.id = j.at("id").get<std::string>();
    df.chain.funcs = j.at("chain").get<std::vector<std::string>>();
    df.chain.vd = j.at("vd").get<VulnerableDestination>();
    df.chain.binding_trace = j.at("binding_trace").get<std::vector<ChainStep>>();
    df.source_calls = j.at("sources").get<std::vector<SourceCall>>();
}

void to_json(json& j, const Prompt& p) { j = json{{"kind", to_string(p.kind)}, {"text", p.text}}; }

void from_json(const json& j, Prompt& p) {
    p.kind = prompt_kind_from_string(j.at("kind").get<std::string>());
    p.text = j.at("text").get<std::string>();
}

void to_json(json& j, const PromptSequence& ps) { j = json{{"df", ps.df_id}, {"prompts", ps.prompts}}; }

void from_json(const json& j, PromptSequence& ps) {
    ps.df_id = j.at("df").get<std::string>();
    ps.prompts = j.at("prompts").get<std::vector<Prompt>>();
}

void to_json(json& j, const ChatMessage& m) { j = json{{"role", m.role}, {"content", m.content}}; }

void from_json(const json& j, ChatMessage& m) {
    m.role = j.at("role").get<std::string>();
    m.content = j.at("content").get<std::string>();
}

void to_json(json& j, const Transcript& t) {
    j = json{{"messages", t.messages},
             {"metadata",
              {{"model", t.params.model},
               {"temperature", t.params.temperature},
               {"timestamp", t.params.timestamp},
               {"retries", t.retries},
               {"note", t.note}}}};
}

void from_json(const json& j, Transcript& t) {
    t.messages = j.at("messages").get<std::vector<ChatMessage>>();
    if (auto it = j.find("metadata"); it != j.end()) {
        t.params.model = it->value("model", "");
        t.params.temperature = it->value("temperature", 0.5);
        t.params.timestamp = it->value("timestamp", "");
        t.retries = it->value("retries", 0);
        t.note = it->value("note", "");
    }
}

void to_json(json& j, const Verdict& v) {
    j = json{{"df", v.df_id},
             {"subject", v.subject},
             {"vulnerable", to_string(v.vulnerable)},
             {"cwe", v.cwe_tags},
             {"transcript", v.transcript}};
}

void from_json(const json& j, Verdict& v) {
    v.df_id = j.at("df").get<std::string>();
    v.subject = j.value("subject", "");
    v.vulnerable = vulnerability_from_string(j.at("vulnerable").get<std::string>());
    v.cwe_tags = j.at("cwe").get<std::vector<std::string>>();
    if (auto it = j.find("transcript"); it != j.end()) v.transcript = it->get<Transcript>();
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw SchemaError("/", "empty document in '" + path.string() + "'");
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("/", std::string("malformed JSON: ") + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "." +
           std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

void write_json_file(const std::filesystem::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace taintchain
