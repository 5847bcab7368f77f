#pragma once

// Vulnerable-destination discovery and backward interprocedural slicing.

#include "taintchain/program_index.hpp"
#include "taintchain/program_model.hpp"

#include <vector>

namespace taintchain::slicer {

/// One VD per sink call site whose selected arguments are not all literal
/// constants. Constant arguments are dropped from the VD; casts are
/// stripped from the argument text. Ordered by function id, then line.
std::vector<VulnerableDestination> locate_vds(const ProgramIndex& index, const std::vector<FuncSpec>& sinks);

struct SliceOptions {
    int depth_limit = kDefaultDepthLimit;
    /// Visit callers in reverse id order (the output is sorted either way).
    bool reverse_caller_order = false;
};

struct SliceResult {
    std::vector<CallChain> chains;  // sorted by function sequence
    std::vector<Diagnostic> diagnostics;
};

/// Depth-first backward traversal from the VD's function. All call sites
/// within one caller are bound together, so each distinct function path
/// yields exactly one chain. A function never appears twice in a chain.
SliceResult backward_slice(const ProgramIndex& index, const VulnerableDestination& vd, const SliceOptions& options = {});

}  // namespace taintchain::slicer
