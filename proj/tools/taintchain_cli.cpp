#include "taintchain/ingest.hpp"
#include "taintchain/json_io.hpp"
#include "taintchain/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace taintchain;

namespace {

struct Options {
    pipeline::Settings settings;
    std::string mock_script;
    std::string sources_file;
    std::string sinks_file;
    std::string cache_file;
    std::string corrections_file;
    std::string effects_file;
    std::string labels_file;
    std::string output;
    std::vector<std::string> inputs;
};

void add_analysis_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--depth-limit", o.settings.depth_limit, "Maximum call chain length")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--sources-file", o.sources_file, "Source specs, one (name; selector) per line")
        ->check(CLI::ExistingFile);
    cmd->add_option("--sinks-file", o.sinks_file, "Sink specs, one (name; selector) per line")
        ->check(CLI::ExistingFile);
    cmd->add_option("--cache", o.cache_file, "Oracle cache file (created if missing)");
    cmd->add_option("--corrections", o.corrections_file, "Correction rules: name role selector")
        ->check(CLI::ExistingFile);
    cmd->add_option("--effects", o.effects_file, "Out-parameter effects: name writes_arg k")
        ->check(CLI::ExistingFile);
}

void add_backend_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--backend", o.settings.backend, "Chat backend")
        ->capture_default_str()
        ->check(CLI::IsMember({"http", "mock"}));
    cmd->add_option("--temperature", o.settings.temperature, "Sampling temperature")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--mock-script", o.mock_script, "Scripted replies for the mock backend")->check(CLI::ExistingFile);
    cmd->add_option("--base-url", o.settings.http.base_url, "HTTP backend base URL")->capture_default_str();
    cmd->add_option("--model", o.settings.http.model, "HTTP backend model id")->capture_default_str();
    cmd->add_option("--api-key-env", o.settings.http.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    cmd->add_option("--rpm", o.settings.http.requests_per_minute, "HTTP request rate limit (0 = none)");
    cmd->add_option("--retries", o.settings.retry.max_retries, "Transport retries per turn")->capture_default_str();
    cmd->add_option("--max-prompt-chars", o.settings.max_prompt_chars, "Refuse longer prompts (0 = no limit)");
}

void add_run_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--rounds", o.settings.rounds, "Analysis rounds")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--jobs", o.settings.jobs, "Parallel workers")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--labels", o.labels_file, "Corpus labels for scoring")->check(CLI::ExistingFile);
}

void finalize(Options& o) {
    auto opt = [](const std::string& s) -> std::optional<fs::path> {
        if (s.empty()) return std::nullopt;
        return fs::path(s);
    };
    o.settings.mock_script = opt(o.mock_script);
    o.settings.sources_file = opt(o.sources_file);
    o.settings.sinks_file = opt(o.sinks_file);
    o.settings.cache_file = opt(o.cache_file);
    o.settings.corrections_file = opt(o.corrections_file);
    o.settings.effects_file = opt(o.effects_file);
    o.settings.labels_file = opt(o.labels_file);
}

void emit(const std::string& output, const json& j) {
    if (output.empty() || output == "-") {
        std::cout << j.dump(2) << "\n";
    } else {
        write_json_file(output, j);
    }
}

void print_diagnostics(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) std::cerr << to_string(d) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static taint analysis of decompiled programs with LLM-assisted vulnerability verdicts"};
    app.require_subcommand(1);
    Options o;

    auto* validate = app.add_subcommand("validate", "Check an export against the schema and its invariants");
    validate->add_option("export", o.inputs, "Export JSON file(s)")->required()->check(CLI::ExistingFile);

    auto* slice = app.add_subcommand("slice", "Identify sinks and sources, locate VDs and slice call chains");
    slice->add_option("export", o.inputs, "Export JSON file")->required()->expected(1)->check(CLI::ExistingFile);
    slice->add_option("-o,--output", o.output, "Output stage file (default stdout)");
    add_analysis_flags(slice, o);
    add_backend_flags(slice, o);

    auto* flows = app.add_subcommand("flows", "Match sources into chains and deduplicate dangerous flows");
    flows->add_option("stage", o.inputs, "Output of 'slice'")->required()->expected(1)->check(CLI::ExistingFile);
    flows->add_option("-o,--output", o.output, "Output stage file (default stdout)");
    flows->add_option("--effects", o.effects_file, "Out-parameter effects: name writes_arg k")
        ->check(CLI::ExistingFile);

    auto* prompts = app.add_subcommand("prompts", "Build prompt sequences for dangerous flows");
    prompts->add_option("stage", o.inputs, "Output of 'flows'")->required()->expected(1)->check(CLI::ExistingFile);
    prompts->add_option("-o,--output", o.output, "Output stage file (default stdout)");

    auto* analyze = app.add_subcommand("analyze", "Run the conversations and write a run directory");
    analyze->add_option("stages", o.inputs, "Output(s) of 'prompts'")->required()->check(CLI::ExistingFile);
    analyze->add_option("-o,--output", o.output, "Run directory")->required();
    add_backend_flags(analyze, o);
    add_run_flags(analyze, o);

    auto* score = app.add_subcommand("score", "Recompute metrics from a run directory");
    score->add_option("run_dir", o.inputs, "Run directory")->required()->expected(1)->check(CLI::ExistingDirectory);
    score->add_option("--labels", o.labels_file, "Labels (default: run_dir/labels.json)")->check(CLI::ExistingFile);
    score->add_option("-o,--output", o.output, "Write metrics JSON here");

    auto* run = app.add_subcommand("run", "Full pipeline over exports (files or directories)");
    run->add_option("exports", o.inputs, "Export files or directories")->required()->check(CLI::ExistingPath);
    run->add_option("-o,--output", o.output, "Run directory")->required();
    add_analysis_flags(run, o);
    add_backend_flags(run, o);
    add_run_flags(run, o);

    CLI11_PARSE(app, argc, argv);
    finalize(o);

    try {
        if (validate->parsed()) {
            int status = 0;
            for (const auto& path : o.inputs) {
                try {
                    auto loaded = ingest::load(path);
                    print_diagnostics(loaded.diagnostics);
                    std::cout << path << ": ok (" << loaded.program.functions.size() << " functions, "
                              << loaded.program.imports.size() << " imports, " << loaded.diagnostics.size()
                              << " warnings)\n";
                } catch (const ingest::LoadError& e) {
                    std::cout << path << ": invalid: " << e.what() << "\n";
                    status = 1;
                }
            }
            return status;
        }
        if (score->parsed()) {
            const fs::path dir = o.inputs.at(0);
            const fs::path labels = o.labels_file.empty() ? dir / "labels.json" : fs::path(o.labels_file);
            auto result = pipeline::score_run(dir, report::load_labels(labels));
            std::cout << pipeline::render(result);
            if (!o.output.empty()) write_json_file(o.output, pipeline::to_json(result));
            return 0;
        }

        pipeline::Session session(o.settings);
        if (slice->parsed()) {
            auto stage = session.load(o.inputs.at(0));
            session.identify(stage);
            session.slice(stage);
            session.save_cache();
            print_diagnostics(stage.diagnostics);
            emit(o.output, pipeline::stage_to_json(stage));
        } else if (flows->parsed()) {
            auto stage = pipeline::read_stage(o.inputs.at(0));
            session.flows(stage);
            emit(o.output, pipeline::stage_to_json(stage));
        } else if (prompts->parsed()) {
            auto stage = pipeline::read_stage(o.inputs.at(0));
            session.prompts(stage);
            emit(o.output, pipeline::stage_to_json(stage));
        } else if (analyze->parsed()) {
            std::vector<pipeline::Stage> stages;
            for (const auto& in : o.inputs) stages.push_back(pipeline::read_stage(in));
            pipeline::write_run(stages, o.output, session);
            std::cout << "wrote " << o.output << "\n";
        } else if (run->parsed()) {
            pipeline::run(std::vector<fs::path>(o.inputs.begin(), o.inputs.end()), o.output, session);
            std::cout << "wrote " << o.output << "\n";
            if (fs::exists(fs::path(o.output) / "metrics.json")) {
                auto labels = report::load_labels(fs::path(o.output) / "labels.json");
                std::cout << pipeline::render(pipeline::score_run(o.output, labels));
            }
        }
    } catch (const ingest::LoadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
