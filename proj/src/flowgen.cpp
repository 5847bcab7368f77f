#include "taintchain/flowgen.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace taintchain::flowgen {

std::set<std::string> source_taint(const pseudoc::CallSite& site, const ParamSelector& selector) {
    std::set<std::string> out;
    for (int pos : selector.positions(static_cast<int>(site.args.size()))) {
        const auto& arg = pseudoc::strip_casts(site.args[static_cast<std::size_t>(pos - 1)]);
        if (arg.kind == pseudoc::ExprKind::unary && arg.text == "&") {
            auto b = pseudoc::base_identifier(arg.children[0]);
            if (!b.empty()) out.insert(b);
            continue;
        }
        auto b = pseudoc::base_identifier(arg);
        if (b.empty()) continue;
        out.insert(b);
        out.insert("*" + b);
    }
    if (selector.selects_return()) {
        auto b = pseudoc::base_identifier(site.lhs);
        if (!b.empty()) out.insert(b);
    }
    return out;
}

namespace {

std::vector<SourceCall> sources_in(const ProgramIndex& index, const ChainStep& step,
                                   const std::vector<FuncSpec>& sources) {
    std::vector<SourceCall> out;
    const auto* ir = index.ir(step.function_id);
    const auto* deps = index.deps(step.function_id);
    if (ir == nullptr || deps == nullptr) return out;
    const std::set<std::string> reach(step.reach.begin(), step.reach.end());
    for (const auto& site : pseudoc::all_call_sites(*ir)) {
        for (const auto& spec : sources) {
            if (spec.name != site.callee) continue;
            auto taint = deps->alias_closure(source_taint(site, spec.selector));
            bool overlap = std::any_of(taint.begin(), taint.end(), [&](const auto& t) { return reach.count(t) != 0; });
            if (!overlap) continue;
            SourceCall sc{step.function_id, site.line, spec, {}, {}};
            for (int pos : spec.selector.positions(static_cast<int>(site.args.size()))) {
                sc.tainted_args.push_back(pseudoc::to_string(site.args[static_cast<std::size_t>(pos - 1)]));
                sc.positions.push_back(pos);
            }
            if (spec.selector.selects_return() && !site.lhs.empty()) {
                sc.tainted_args.push_back(pseudoc::to_string(site.lhs));
                sc.positions.push_back(0);
            }
            out.push_back(std::move(sc));
        }
    }
    return out;
}

}  // namespace

std::vector<DangerousFlow> match_sources(const ProgramIndex& index, const std::vector<CallChain>& chains,
                                         const std::vector<FuncSpec>& sources) {
    std::vector<DangerousFlow> out;
    for (const auto& chain : chains) {
        std::vector<std::vector<SourceCall>> found;
        std::size_t head = chain.funcs.size();
        for (std::size_t i = 0; i < chain.funcs.size() && i < chain.binding_trace.size(); ++i) {
            found.push_back(sources_in(index, chain.binding_trace[i], sources));
            if (!found.back().empty() && head == chain.funcs.size()) head = i;
        }
        if (head == chain.funcs.size()) continue;
        DangerousFlow df;
        df.chain.vd = chain.vd;
        df.chain.funcs.assign(chain.funcs.begin() + static_cast<std::ptrdiff_t>(head), chain.funcs.end());
        df.chain.binding_trace.assign(chain.binding_trace.begin() + static_cast<std::ptrdiff_t>(head),
                                      chain.binding_trace.end());
        for (std::size_t i = head; i < found.size(); ++i) {
            df.source_calls.insert(df.source_calls.end(), found[i].begin(), found[i].end());
        }
        out.push_back(std::move(df));
    }
    return out;
}

bool is_subchain(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return a.size() < b.size() && std::equal(a.rbegin(), a.rend(), b.rbegin());
}

std::vector<DangerousFlow> dedup(std::vector<DangerousFlow> flows) {
    std::stable_sort(flows.begin(), flows.end(), [](const DangerousFlow& x, const DangerousFlow& y) {
        if (x.chain.vd != y.chain.vd) return x.chain.vd < y.chain.vd;
        return x.chain.funcs < y.chain.funcs;
    });
    std::vector<DangerousFlow> out;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const auto& f = flows[i];
        bool drop = false;
        for (std::size_t j = 0; j < flows.size() && !drop; ++j) {
            if (i == j || flows[j].chain.vd != f.chain.vd) continue;
            if (is_subchain(f.chain.funcs, flows[j].chain.funcs)) drop = true;
            if (j < i && flows[j].chain.funcs == f.chain.funcs) drop = true;
        }
        if (!drop) out.push_back(f);
    }
    return out;
}

void assign_ids(std::vector<DangerousFlow>& flows, const std::string& subject) {
    for (std::size_t i = 0; i < flows.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "-df%03zu", i + 1);
        flows[i].id = subject + buf;
    }
}

}  // namespace taintchain::flowgen
