#pragma once

// Source and sink identification for imported functions: prompt rendering,
// reply parsing, expert correction rules and a persistent cache.

#include "taintchain/llm_backend.hpp"
#include "taintchain/program_model.hpp"

#include <cstddef>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace taintchain::oracle {

enum class Outcome { positive, negative, indeterminate };
std::string to_string(Outcome o);

std::string sink_prompt(const std::string& subject);
std::string source_prompt(const std::string& subject);

struct ParsedReply {
    Outcome outcome = Outcome::indeterminate;
    std::vector<std::pair<std::string, ParamSelector>> specs;
};

/// Extracts every "(name; k, ...)" / "(name; >k)" pattern. A leading "no"
/// means negative; "yes" without a pattern is a parse failure
/// (indeterminate); patterns without a yes/no head count as positive.
/// Open lists such as "2, 3, ..." become all-from selectors and position 0
/// (or "ret") selects the return value.
ParsedReply parse_spec_reply(const std::string& text);

/// Parses "(name; selector)" lines as produced by --sources-file and
/// --sinks-file; '#' comments and blank lines are skipped.
std::vector<FuncSpec> parse_spec_list(const std::string& text, Role role);
std::vector<FuncSpec> load_spec_list(const std::filesystem::path& path, Role role);

/// Expert fixes keyed by (name, role). Each rule replaces the selector of a
/// positive classification.
class CorrectionRules {
public:
    /// The fscanf rule: data lands in the arguments after the format.
    static CorrectionRules seeded();
    /// Lines of "name role selector", e.g. "fscanf source >2".
    void load(const std::string& text);
    void load_file(const std::filesystem::path& path);
    void add(const std::string& name, Role role, ParamSelector selector);
    FuncSpec apply(FuncSpec spec) const;
    std::size_t size() const { return rules_.size(); }

private:
    std::map<std::pair<std::string, Role>, ParamSelector> rules_;
};

struct CacheEntry {
    std::string name;
    Role role = Role::sink;
    Outcome outcome = Outcome::indeterminate;
    ParamSelector selector;  // meaningful for positive entries
    std::string model;
    std::string timestamp;
    std::string raw;  // last raw reply or error, kept for audit
    bool operator==(const CacheEntry&) const = default;
};

/// Thread-safe map (name, role) -> entry. Persisted as a JSON array of
/// {name, role, selector | "negative" | "indeterminate", model, timestamp, raw}.
class OracleCache {
public:
    OracleCache() = default;
    OracleCache(const OracleCache& other);
    OracleCache& operator=(const OracleCache& other);

    std::optional<CacheEntry> get(const std::string& name, Role role) const;
    void put(CacheEntry e);
    std::vector<CacheEntry> entries() const;  // sorted by (name, role)
    std::size_t size() const;

    std::string to_json_text() const;
    static OracleCache from_json_text(const std::string& text);
    void save(const std::filesystem::path& path) const;
    /// Missing file yields an empty cache.
    static OracleCache load(const std::filesystem::path& path);

private:
    mutable std::mutex mu_;
    std::map<std::pair<std::string, Role>, CacheEntry> entries_;
};

struct ClassifyResult {
    Outcome outcome = Outcome::indeterminate;
    std::optional<FuncSpec> spec;
    std::string raw;
    bool from_cache = false;
};

struct Identified {
    std::vector<FuncSpec> sinks;
    std::vector<FuncSpec> sources;
    std::vector<Diagnostic> diagnostics;  // indeterminate classifications
};

class Oracle {
public:
    /// `backend` may be null, in which case only the cache answers.
    Oracle(OracleCache& cache, CorrectionRules rules, llm::LlmBackend* backend, llm::RetryPolicy retry = {});

    /// Cache hits never reach the backend, except indeterminate entries
    /// which are re-queried when a backend is available. Concurrent calls
    /// for the same (name, role) share one backend request.
    ClassifyResult classify(const std::string& name, Role role, const std::optional<std::string>& body = std::nullopt);

    /// Classifies every import in both roles. Static imports are described
    /// by their body instead of their name.
    Identified identify(const ProgramExport& exp);

    std::size_t backend_requests() const;

private:
    ClassifyResult query(const std::string& name, Role role, const std::optional<std::string>& body);

    OracleCache& cache_;
    CorrectionRules rules_;
    llm::LlmBackend* backend_;
    llm::RetryPolicy retry_;
    mutable std::mutex mu_;
    std::map<std::pair<std::string, Role>, std::shared_future<ClassifyResult>> in_flight_;
    std::size_t requests_ = 0;
};

}  // namespace taintchain::oracle
