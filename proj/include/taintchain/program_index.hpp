#pragma once

// Parsed view of an export shared by slicing and flow generation: IR and
// dependency graph per parseable function plus the call graph. Built once,
// read-only afterwards.

#include "taintchain/dataflow.hpp"
#include "taintchain/ingest.hpp"
#include "taintchain/program_model.hpp"
#include "taintchain/pseudoc.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace taintchain {

class ProgramIndex {
public:
    ProgramIndex(ProgramExport exp, dataflow::EffectTable effects);

    const ProgramExport& program() const { return exp_; }
    const ingest::CallGraph& graph() const { return graph_; }
    const dataflow::EffectTable& effects() const { return effects_; }

    /// Null for unknown ids and for functions whose body is missing or
    /// unparseable.
    const pseudoc::FunctionIR* ir(const std::string& id) const;
    const dataflow::DepGraph* deps(const std::string& id) const;

    /// Unparseable-body diagnostics followed by call-graph warnings.
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    struct Analysis {
        pseudoc::FunctionIR ir;
        dataflow::DepGraph deps;
    };

    ProgramExport exp_;
    dataflow::EffectTable effects_;
    ingest::CallGraph graph_;
    std::map<std::string, Analysis> functions_;
    std::vector<Diagnostic> diagnostics_;
};

}  // namespace taintchain
