#pragma once

// End-to-end orchestration shared by the CLI and the Python module: stage
// documents, the run directory layout and re-scoring from disk.
//
// Run directory:
//   subjects.json          per-subject summary (specs, counts)
//   manifest.jsonl         one dangerous flow per line
//   diagnostics.jsonl      non-fatal diagnostics
//   prompts/<df>.json      prompt sequences
//   results/round-<k>/<df>.json   verdict with full transcript
//   timings.json           seconds per subject and round
//   labels.json, metrics.json     when labels are supplied

#include "taintchain/llm_backend.hpp"
#include "taintchain/oracle.hpp"
#include "taintchain/program_model.hpp"
#include "taintchain/promptchat.hpp"
#include "taintchain/report.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace taintchain::pipeline {

struct Settings {
    int depth_limit = kDefaultDepthLimit;
    double temperature = llm::kDefaultTemperature;
    std::string backend = "mock";  // "mock" | "http"
    std::optional<std::filesystem::path> mock_script;
    llm::HttpConfig http;
    std::optional<std::filesystem::path> sources_file;
    std::optional<std::filesystem::path> sinks_file;
    std::optional<std::filesystem::path> cache_file;
    std::optional<std::filesystem::path> corrections_file;
    std::optional<std::filesystem::path> effects_file;
    std::optional<std::filesystem::path> labels_file;
    int rounds = 1;
    int jobs = 1;
    std::size_t max_prompt_chars = 0;
    llm::RetryPolicy retry;
};

/// Artifacts accumulated for one subject (one export). Serialized between
/// CLI stages with the export embedded.
struct Stage {
    std::string stage = "load";  // load | slice | flows | prompts
    std::string subject;
    ProgramExport program;
    std::vector<FuncSpec> sinks;
    std::vector<FuncSpec> sources;
    std::vector<Diagnostic> diagnostics;
    std::vector<VulnerableDestination> vds;
    std::vector<CallChain> chains;
    std::vector<DangerousFlow> flows;
    std::vector<PromptSequence> prompts;
    double seconds = 0;  // analysis time, not serialized
};

json stage_to_json(const Stage& s);
Stage stage_from_json(const json& j);
Stage read_stage(const std::filesystem::path& path);
void write_stage(const std::filesystem::path& path, const Stage& s);

/// Filesystem-safe subject name.
std::string sanitize(const std::string& name);

/// Shared resources for a run: backend, oracle cache and correction rules.
class Session {
public:
    explicit Session(Settings settings);
    ~Session();

    const Settings& settings() const { return settings_; }
    llm::LlmBackend& backend() { return *backend_; }
    oracle::OracleCache& cache() { return cache_; }

    /// Throws ingest::LoadError.
    Stage load(const std::filesystem::path& export_path);
    Stage load_program(ProgramExport program, std::vector<Diagnostic> diagnostics = {});

    void identify(Stage& s);
    void slice(Stage& s);
    void flows(Stage& s);
    void prompts(Stage& s);
    /// load + identify + slice + flows + prompts.
    Stage prepare(const std::filesystem::path& export_path);

    std::vector<Verdict> analyze(const Stage& s);

    /// Persists the oracle cache when a cache file is configured.
    void save_cache();

private:
    Settings settings_;
    std::unique_ptr<llm::LlmBackend> backend_;
    oracle::OracleCache cache_;
    oracle::CorrectionRules corrections_;
    std::unique_ptr<oracle::Oracle> oracle_;
};

/// Runs conversations for every prepared subject (settings.rounds times)
/// and writes the run directory. Metrics are written when labels are
/// configured, by re-scoring the directory just written.
void write_run(const std::vector<Stage>& stages, const std::filesystem::path& out_dir, Session& session);

/// Full pipeline over export files.
void run(const std::vector<std::filesystem::path>& exports, const std::filesystem::path& out_dir, Session& session);

struct RunScore {
    std::vector<report::MetricsTable> rounds;
    std::set<std::string> tp_intersection;
};

/// Recomputes metrics from the persisted files of a run directory.
RunScore score_run(const std::filesystem::path& run_dir, const report::Labels& labels);
json to_json(const RunScore& s);
std::string render(const RunScore& s);

std::vector<Verdict> read_verdicts(const std::filesystem::path& round_dir);

/// Expands directories to the *.json files they contain, sorted.
std::vector<std::filesystem::path> expand_inputs(const std::vector<std::filesystem::path>& inputs);

}  // namespace taintchain::pipeline
