#include "taintchain/slicer.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace taintchain::slicer {

namespace {

std::map<std::string, ParamSelector> merge_specs(const std::vector<FuncSpec>& specs) {
    std::map<std::string, ParamSelector> out;
    for (const auto& s : specs) {
        auto [it, fresh] = out.emplace(s.name, s.selector);
        if (!fresh) it->second = it->second.merged(s.selector);
    }
    return out;
}

std::vector<std::string> sorted(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

class Slicer {
public:
    Slicer(const ProgramIndex& index, const VulnerableDestination& vd, const SliceOptions& options)
        : index_(index), vd_(vd), options_(options) {}

    SliceResult run() {
        const auto* ir = index_.ir(vd_.function_id);
        if (ir == nullptr) {
            result_.diagnostics.push_back(
                {Severity::warning, "slice/" + vd_.function_id, "VD function is not parseable; no chain"});
            return std::move(result_);
        }
        std::set<std::string> seeds;
        for (const auto& a : vd_.args) {
            auto ids = dataflow::seed_identifiers(a);
            seeds.insert(ids.begin(), ids.end());
        }
        visit(vd_.function_id, seeds, {vd_.site_line}, {});
        std::sort(result_.chains.begin(), result_.chains.end(),
                  [](const CallChain& a, const CallChain& b) { return a.funcs < b.funcs; });
        return std::move(result_);
    }

private:
    void emit() {
        CallChain c;
        c.vd = vd_;
        for (auto it = path_.rbegin(); it != path_.rend(); ++it) {
            c.funcs.push_back(it->function_id);
            c.binding_trace.push_back(*it);
        }
        result_.chains.push_back(std::move(c));
    }

    void note(const std::string& where, const std::string& msg) {
        result_.diagnostics.push_back({Severity::warning, "slice/" + where, msg});
    }

    void visit(const std::string& fid, const std::set<std::string>& seeds, std::vector<int> call_lines,
               std::vector<ArgBinding> bindings) {
        const auto& deps = *index_.deps(fid);
        ChainStep step;
        step.function_id = fid;
        step.call_lines = std::move(call_lines);
        step.bindings = std::move(bindings);
        step.seeds = sorted(seeds);
        step.reach = sorted(deps.backward_reach(seeds));
        step.dependent_params = dataflow::depends_on_params(deps, seeds);
        path_.push_back(step);
        on_path_.insert(fid);

        bool extended = false;
        if (!step.dependent_params.empty() && static_cast<int>(path_.size()) < options_.depth_limit) {
            extended = extend(fid, step.dependent_params);
        }
        if (!extended) emit();

        on_path_.erase(fid);
        path_.pop_back();
    }

    bool extend(const std::string& fid, const std::vector<std::string>& dependent) {
        const FunctionRecord* callee = index_.program().find_function(fid);
        const auto params = callee->param_names();
        const std::set<std::string> wanted(dependent.begin(), dependent.end());

        std::map<std::string, std::set<int>> by_caller;
        for (const auto& site : index_.graph().callers_of(fid)) by_caller[site.caller].insert(site.line);
        std::vector<std::string> order;
        for (const auto& [caller, _] : by_caller) order.push_back(caller);
        if (options_.reverse_caller_order) std::reverse(order.begin(), order.end());

        bool extended = false;
        for (const auto& caller : order) {
            if (on_path_.count(caller) != 0) continue;
            const auto* caller_ir = index_.ir(caller);
            if (caller_ir == nullptr) {
                note(caller, "caller of '" + fid + "' is not parseable; path truncated");
                continue;
            }
            std::set<std::string> seeds;
            std::vector<ArgBinding> bound;
            std::vector<int> lines;
            for (int line : by_caller[caller]) {
                auto spelled = spelled_callee(*caller_ir, line, fid);
                if (spelled.empty()) {
                    note(caller + ":" + std::to_string(line), "call to '" + fid + "' not found in parsed body");
                    continue;
                }
                try {
                    for (auto& b : dataflow::bind_arguments(*caller_ir, line, spelled, params, callee->is_variadic())) {
                        if (wanted.count(b.param) == 0) continue;
                        auto ids = dataflow::seed_identifiers(b.arg);
                        seeds.insert(ids.begin(), ids.end());
                        bound.push_back(std::move(b));
                    }
                    lines.push_back(line);
                } catch (const dataflow::BindingError& e) {
                    note(caller + ":" + std::to_string(line), std::string("binding failed: ") + e.what());
                }
            }
            if (lines.empty()) continue;
            extended = true;
            visit(caller, seeds, std::move(lines), std::move(bound));
        }
        return extended;
    }

    std::string spelled_callee(const pseudoc::FunctionIR& ir, int line, const std::string& fid) const {
        for (const auto& site : pseudoc::all_call_sites(ir)) {
            if (site.line != line) continue;
            const auto* f = index_.program().resolve_callee(site.callee);
            if (f != nullptr && f->id == fid) return site.callee;
        }
        return {};
    }

    const ProgramIndex& index_;
    const VulnerableDestination& vd_;
    const SliceOptions& options_;
    std::vector<ChainStep> path_;
    std::set<std::string> on_path_;
    SliceResult result_;
};

}  // namespace

std::vector<VulnerableDestination> locate_vds(const ProgramIndex& index, const std::vector<FuncSpec>& sinks) {
    const auto specs = merge_specs(sinks);
    std::vector<VulnerableDestination> out;
    for (const auto& f : index.program().functions) {
        const auto* ir = index.ir(f.id);
        if (ir == nullptr) continue;
        for (const auto& site : pseudoc::all_call_sites(*ir)) {
            auto it = specs.find(site.callee);
            if (it == specs.end()) continue;
            VulnerableDestination vd{f.id, site.line, site.callee, {}, {}};
            for (int pos : it->second.positions(static_cast<int>(site.args.size()))) {
                const auto& arg = site.args[static_cast<std::size_t>(pos - 1)];
                if (pseudoc::is_literal_constant(arg)) continue;
                vd.args.push_back(pseudoc::to_string(pseudoc::strip_casts(arg)));
                vd.arg_positions.push_back(pos);
            }
            if (!vd.args.empty()) out.push_back(std::move(vd));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SliceResult backward_slice(const ProgramIndex& index, const VulnerableDestination& vd, const SliceOptions& options) {
    return Slicer(index, vd, options).run();
}

}  // namespace taintchain::slicer
