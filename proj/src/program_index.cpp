#include "taintchain/program_index.hpp"

namespace taintchain {

ProgramIndex::ProgramIndex(ProgramExport exp, dataflow::EffectTable effects)
    : exp_(std::move(exp)), effects_(std::move(effects)), graph_(ingest::build_call_graph(exp_)) {
    for (const auto& f : exp_.functions) {
        if (f.body.find_first_not_of(" \t\r\n") == std::string::npos) {
            diagnostics_.push_back({Severity::warning, "functions/" + f.id, "no body; excluded from slicing"});
            continue;
        }
        try {
            auto ir = pseudoc::parse_function(f.body);
            auto deps = dataflow::build_deps(ir, effects_, f.params);
            functions_.emplace(f.id, Analysis{std::move(ir), std::move(deps)});
        } catch (const pseudoc::ParseError& e) {
            diagnostics_.push_back({Severity::warning, "functions/" + f.id + ":" + std::to_string(e.line()),
                                    std::string("unparseable body; excluded from slicing: ") + e.what()});
        }
    }
    diagnostics_.insert(diagnostics_.end(), graph_.diagnostics().begin(), graph_.diagnostics().end());
}

const pseudoc::FunctionIR* ProgramIndex::ir(const std::string& id) const {
    auto it = functions_.find(id);
    return it == functions_.end() ? nullptr : &it->second.ir;
}

const dataflow::DepGraph* ProgramIndex::deps(const std::string& id) const {
    auto it = functions_.find(id);
    return it == functions_.end() ? nullptr : &it->second.deps;
}

}  // namespace taintchain
