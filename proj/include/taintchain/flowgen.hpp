#pragma once

// Anchors external-input sources into call chains and removes redundant
// dangerous flows.

#include "taintchain/program_index.hpp"
#include "taintchain/program_model.hpp"

#include <set>
#include <string>
#include <vector>

namespace taintchain::flowgen {

/// Identifiers a source call taints: the base of every selected argument
/// (plus its pointee node), or the call's lhs for return-value selectors.
std::set<std::string> source_taint(const pseudoc::CallSite& site, const ParamSelector& selector);

/// For each chain, the source calls whose taint (alias closed) overlaps the
/// reach recorded for their host function. The candidate starts at the
/// earliest such function, so only the longest candidate per chain is
/// produced; it lists every overlapping source call from its head onward.
std::vector<DangerousFlow> match_sources(const ProgramIndex& index, const std::vector<CallChain>& chains,
                                         const std::vector<FuncSpec>& sources);

/// True iff `a` is a proper suffix of `b`.
bool is_subchain(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Drops flows whose sequence is a suffix of another flow's sequence at the
/// same VD (exact duplicates keep their first occurrence). Survivors are
/// ordered by VD, then by function sequence.
std::vector<DangerousFlow> dedup(std::vector<DangerousFlow> flows);

/// Ids "<subject>-df001", "<subject>-df002", ... in the current order.
void assign_ids(std::vector<DangerousFlow>& flows, const std::string& subject);

}  // namespace taintchain::flowgen
