#include "taintchain/dataflow.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

namespace taintchain::dataflow {

using pseudoc::Expr;
using pseudoc::ExprKind;
using pseudoc::Stmt;
using pseudoc::StmtKind;

EffectTable EffectTable::builtin() {
    EffectTable t;
    for (const char* name : {"memcpy", "memmove", "strcpy", "strncpy", "strcat", "strncat", "sprintf", "snprintf"}) {
        t.set(name, ParamSelector::index(1));
    }
    return t;
}

void EffectTable::add(const std::string& callee, const ParamSelector& writes) {
    auto it = table_.find(callee);
    if (it == table_.end()) {
        table_[callee] = writes;
    } else {
        it->second = it->second.merged(writes);
    }
}

const ParamSelector* EffectTable::find(const std::string& callee) const {
    auto it = table_.find(callee);
    return it == table_.end() ? nullptr : &it->second;
}

void EffectTable::add_sources(const std::vector<FuncSpec>& sources) {
    for (const auto& s : sources) {
        if (s.role == Role::source) add(s.name, s.selector);
    }
}

void EffectTable::load_overrides(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string name;
        std::string verb;
        if (!(ls >> name)) continue;
        if (!(ls >> verb) || verb != "writes_arg") {
            throw std::invalid_argument("effects line " + std::to_string(lineno) + ": expected 'name writes_arg k'");
        }
        std::string rest;
        std::getline(ls, rest);
        table_[name] = ParamSelector::parse(rest);
    }
}

void EffectTable::load_overrides_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open effects file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    load_overrides(ss.str());
}

// ---------------------------------------------------------------------------

namespace {

class UnionFind {
public:
    std::string find(const std::string& x) {
        auto it = parent_.find(x);
        if (it == parent_.end()) {
            parent_[x] = x;
            return x;
        }
        if (it->second == x) return x;
        std::string root = find(it->second);
        parent_[x] = root;
        return root;
    }
    void unite(const std::string& a, const std::string& b) {
        std::string ra = find(a);
        std::string rb = find(b);
        if (ra == rb) return;
        if (rb < ra) std::swap(ra, rb);
        parent_[rb] = ra;
    }
    std::map<std::string, std::vector<std::string>> groups() {
        std::map<std::string, std::vector<std::string>> out;
        std::vector<std::string> keys;
        for (const auto& [k, _] : parent_) keys.push_back(k);
        for (const auto& k : keys) out[find(k)].push_back(k);
        return out;
    }

private:
    std::map<std::string, std::string> parent_;
};

struct Builder {
    const EffectTable& effects;
    std::map<std::string, std::string> types;
    std::set<std::string> nodes;
    std::vector<DepEdge> edges;
    UnionFind aliases;

    bool is_array(const std::string& n) const {
        auto it = types.find(n);
        return it != types.end() && it->second.find('[') != std::string::npos;
    }
    bool is_pointer(const std::string& n) const {
        auto it = types.find(n);
        return it != types.end() &&
               (it->second.find('*') != std::string::npos || it->second.find('[') != std::string::npos);
    }
    std::string pointee(const std::string& n) const { return "*" + n; }

    std::set<std::string> read_nodes(const Expr& e) const {
        auto info = pseudoc::analyze_expr(e);
        std::set<std::string> out = info.reads;
        for (const auto& d : info.derefs) {
            if (!is_array(d)) out.insert(pointee(d));
        }
        return out;
    }

    std::set<std::string> lvalue_targets(const Expr& lhs) const {
        std::set<std::string> out;
        auto base = pseudoc::base_identifier(lhs);
        if (base.empty()) return out;
        out.insert(base);
        if (pseudoc::is_dereference(lhs) && !is_array(base)) out.insert(pointee(base));
        return out;
    }

    std::set<std::string> arg_targets(const Expr& arg) const {
        const Expr& a = pseudoc::strip_casts(arg);
        std::set<std::string> out;
        if (a.kind == ExprKind::unary && a.text == "&") {
            auto b = pseudoc::base_identifier(a.children[0]);
            if (!b.empty()) out.insert(b);
            return out;
        }
        auto b = pseudoc::base_identifier(a);
        if (b.empty()) return out;
        out.insert(b);
        if (!is_array(b)) out.insert(pointee(b));
        return out;
    }

    void add_edges(const std::set<std::string>& from, const std::set<std::string>& to, int line) {
        for (const auto& t : to) {
            nodes.insert(t);
            for (const auto& f : from) {
                nodes.insert(f);
                if (f != t) edges.push_back({f, t, line});
            }
        }
    }

    void pointer_alias(const Expr& lhs, const Expr& value) {
        const Expr& l = pseudoc::strip_casts(lhs);
        if (l.kind != ExprKind::identifier) return;
        const std::string& L = l.text;
        const Expr& r = pseudoc::strip_casts(value);
        if (r.kind == ExprKind::unary && r.text == "&") {
            auto b = pseudoc::base_identifier(r.children[0]);
            if (!b.empty()) aliases.unite(pointee(L), b);
            return;
        }
        const bool plain = r.kind == ExprKind::identifier ||
                           (r.kind == ExprKind::binary && (r.text == "+" || r.text == "-"));
        if (!plain) return;
        auto a = pseudoc::base_identifier(r);
        if (a.empty() || a == L) return;
        if (is_array(a)) {
            aliases.unite(pointee(L), a);
        } else if (is_pointer(a) || is_pointer(L)) {
            aliases.unite(pointee(L), pointee(a));
        }
    }

    void call_effects(const Stmt& s, int line) {
        std::vector<const Expr*> calls;
        for (const Expr* e : pseudoc::stmt_exprs(s)) pseudoc::collect_calls(*e, calls);
        for (const Expr* c : calls) {
            const ParamSelector* sel = effects.find(pseudoc::callee_name(*c));
            if (sel == nullptr) continue;
            const int nargs = static_cast<int>(c->children.size()) - 1;
            auto written = sel->positions(nargs);
            if (written.empty()) continue;
            std::set<std::string> srcs;
            for (int k = 1; k <= nargs; ++k) {
                if (std::find(written.begin(), written.end(), k) != written.end()) continue;
                const Expr& arg = c->children[static_cast<std::size_t>(k)];
                auto r = read_nodes(arg);
                srcs.insert(r.begin(), r.end());
                // the callee reads through pointer arguments
                const Expr& plain = pseudoc::strip_casts(arg);
                if (plain.kind == ExprKind::identifier && is_pointer(plain.text) && !is_array(plain.text)) {
                    srcs.insert(pointee(plain.text));
                }
            }
            for (int w : written) add_edges(srcs, arg_targets(c->children[static_cast<std::size_t>(w)]), line);
        }
    }

    void visit(const Stmt& s) {
        const int line = s.kind == StmtKind::loop ? s.cond_line : s.line;
        nodes.insert(s.reads.begin(), s.reads.end());
        nodes.insert(s.writes.begin(), s.writes.end());
        switch (s.kind) {
            case StmtKind::assign: {
                auto srcs = read_nodes(s.value);
                auto targets = lvalue_targets(s.lhs);
                if (s.op != "=") srcs.insert(targets.begin(), targets.end());
                add_edges(srcs, targets, line);
                if (s.op == "=") pointer_alias(s.lhs, s.value);
                break;
            }
            case StmtKind::call:
                if (!s.lhs.empty()) add_edges(read_nodes(s.value), lvalue_targets(s.lhs), line);
                break;
            case StmtKind::opaque:
                add_edges(s.reads, s.writes, line);
                break;
            case StmtKind::if_:
            case StmtKind::loop:
            case StmtKind::ret:
            case StmtKind::decl:
                break;
        }
        call_effects(s, line);
    }
};

}  // namespace

DepGraph build_deps(const pseudoc::FunctionIR& ir, const EffectTable& effects, const std::vector<ParamDecl>& params) {
    Builder b{effects, {}, {}, {}, {}};
    DepGraph g;
    if (!params.empty()) {
        for (const auto& p : params) {
            if (p.name == "..." || p.name.empty()) continue;
            g.params_.push_back(p.name);
            b.types[p.name] = p.type;
        }
    } else {
        for (const auto& p : ir.params) {
            if (p.name == "..." || p.name.empty()) continue;
            g.params_.push_back(p.name);
            b.types[p.name] = p.type;
        }
    }
    pseudoc::for_each_stmt(ir.stmts, [&](const Stmt& s) {
        if (s.kind == StmtKind::decl) b.types[s.name] = s.type_text;
    });
    pseudoc::for_each_stmt(ir.stmts, [&](const Stmt& s) { b.visit(s); });

    b.nodes.insert(g.params_.begin(), g.params_.end());

    for (auto& [root, members] : b.aliases.groups()) {
        if (members.size() < 2) continue;
        std::sort(members.begin(), members.end());
        g.classes_.push_back(members);
    }
    std::sort(g.classes_.begin(), g.classes_.end());
    for (std::size_t i = 0; i < g.classes_.size(); ++i) {
        for (const auto& m : g.classes_[i]) {
            g.class_index_[m] = i;
            b.nodes.insert(m);
        }
    }

    std::set<DepEdge> closed(b.edges.begin(), b.edges.end());
    for (const auto& e : b.edges) {
        auto it = g.class_index_.find(e.to);
        if (it == g.class_index_.end()) continue;
        for (const auto& m : g.classes_[it->second]) {
            if (m != e.from) closed.insert({e.from, m, e.line});
        }
    }
    g.edges_.assign(closed.begin(), closed.end());
    g.nodes_ = std::move(b.nodes);
    for (const auto& e : g.edges_) g.preds_[e.to].insert(e.from);
    return g;
}

bool DepGraph::has_edge(const std::string& from, const std::string& to) const {
    auto it = preds_.find(to);
    return it != preds_.end() && it->second.count(from) != 0;
}

std::vector<std::string> DepGraph::alias_class_of(const std::string& id) const {
    auto it = class_index_.find(id);
    if (it == class_index_.end()) return {id};
    return classes_[it->second];
}

std::set<std::string> DepGraph::alias_closure(const std::set<std::string>& ids) const {
    std::set<std::string> out;
    for (const auto& id : ids) {
        auto cls = alias_class_of(id);
        out.insert(cls.begin(), cls.end());
    }
    return out;
}

std::set<std::string> DepGraph::backward_reach(const std::set<std::string>& seeds) const {
    std::set<std::string> reached = alias_closure(seeds);
    std::deque<std::string> work(reached.begin(), reached.end());
    while (!work.empty()) {
        std::string n = std::move(work.front());
        work.pop_front();
        auto it = preds_.find(n);
        if (it == preds_.end()) continue;
        for (const auto& p : it->second) {
            for (const auto& m : alias_class_of(p)) {
                if (reached.insert(m).second) work.push_back(m);
            }
        }
    }
    return reached;
}

std::vector<std::string> depends_on_params(const DepGraph& dep, const std::set<std::string>& seeds) {
    auto reach = dep.backward_reach(seeds);
    std::vector<std::string> out;
    for (const auto& p : dep.params()) {
        if (reach.count(p) != 0 || reach.count("*" + p) != 0) out.push_back(p);
    }
    return out;
}

std::set<std::string> seed_identifiers(const Expr& e) {
    const Expr& s = pseudoc::strip_casts(e);
    if (s.kind == ExprKind::unary && s.text == "&") {
        auto b = pseudoc::base_identifier(s.children[0]);
        if (!b.empty()) return {b};
    }
    auto info = pseudoc::analyze_expr(s);
    std::set<std::string> out = info.reads;
    for (const auto& d : info.derefs) out.insert("*" + d);
    return out;
}

std::set<std::string> seed_identifiers(const std::string& expr_text) {
    try {
        return seed_identifiers(pseudoc::parse_expression(expr_text));
    } catch (const pseudoc::ParseError&) {
        return {};
    }
}

std::vector<ArgBinding> bind_arguments(const pseudoc::FunctionIR& caller_ir, int site_line, const std::string& callee,
                                       const std::vector<std::string>& callee_params, bool variadic) {
    auto sites = pseudoc::call_sites(caller_ir, callee);
    auto it = std::find_if(sites.begin(), sites.end(), [&](const pseudoc::CallSite& s) { return s.line == site_line; });
    if (it == sites.end()) {
        throw std::out_of_range("no call to '" + callee + "' at line " + std::to_string(site_line));
    }
    const auto& args = it->args;
    if (!variadic && args.size() < callee_params.size()) throw BindingError(args.size(), callee_params.size());
    std::vector<ArgBinding> out;
    const std::size_t fixed = std::min(args.size(), callee_params.size());
    for (std::size_t i = 0; i < fixed; ++i) out.push_back({callee_params[i], pseudoc::to_string(args[i])});
    if (variadic) {
        for (std::size_t i = callee_params.size(); i < args.size(); ++i) {
            out.push_back({"vararg_" + std::to_string(i - callee_params.size() + 1), pseudoc::to_string(args[i])});
        }
    }
    return out;
}

}  // namespace taintchain::dataflow
