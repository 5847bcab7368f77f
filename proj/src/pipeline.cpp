#include "taintchain/pipeline.hpp"

#include "taintchain/flowgen.hpp"
#include "taintchain/ingest.hpp"
#include "taintchain/program_index.hpp"
#include "taintchain/slicer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace taintchain::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first exception.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::unique_ptr<llm::LlmBackend> make_backend(const Settings& s) {
    if (s.backend == "mock") {
        llm::MockScript script = s.mock_script ? llm::load_mock_script(*s.mock_script) : llm::MockScript{};
        return std::make_unique<llm::MockBackend>(std::move(script), s.temperature);
    }
    if (s.backend == "http") {
        auto cfg = s.http;
        cfg.temperature = s.temperature;
        return std::make_unique<llm::HttpBackend>(cfg);
    }
    throw std::invalid_argument("unknown backend '" + s.backend + "' (expected http or mock)");
}

void write_text(const fs::path& p, const std::string& text) { write_file_atomic(p, text); }

std::string jsonl(const std::vector<json>& lines) {
    std::string out;
    for (const auto& j : lines) out += j.dump() + "\n";
    return out;
}

}  // namespace

std::string sanitize(const std::string& name) {
    std::string out;
    for (char c : name) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "subject" : out;
}

// ---------------------------------------------------------------------------
// Stage documents

json stage_to_json(const Stage& s) {
    return {{"stage", s.stage},
            {"subject", s.subject},
            {"export", encode_export(s.program)},
            {"sinks", s.sinks},
            {"sources", s.sources},
            {"diagnostics", s.diagnostics},
            {"vds", s.vds},
            {"chains", s.chains},
            {"flows", s.flows},
            {"prompts", s.prompts}};
}

Stage stage_from_json(const json& j) {
    Stage s;
    try {
        s.stage = j.at("stage").get<std::string>();
        s.subject = j.at("subject").get<std::string>();
        s.program = decode_export(j.at("export")).program;
        s.sinks = j.value("sinks", std::vector<FuncSpec>{});
        s.sources = j.value("sources", std::vector<FuncSpec>{});
        s.diagnostics = j.value("diagnostics", std::vector<Diagnostic>{});
        s.vds = j.value("vds", std::vector<VulnerableDestination>{});
        s.chains = j.value("chains", std::vector<CallChain>{});
        s.flows = j.value("flows", std::vector<DangerousFlow>{});
        s.prompts = j.value("prompts", std::vector<PromptSequence>{});
    } catch (const json::exception& e) {
        throw SchemaError("<stage>", e.what());
    }
    return s;
}

Stage read_stage(const fs::path& path) { return stage_from_json(read_json_file(path)); }

void write_stage(const fs::path& path, const Stage& s) { write_json_file(path, stage_to_json(s)); }

// ---------------------------------------------------------------------------
// Session

Session::Session(Settings settings) : settings_(std::move(settings)) {
    llm::check_temperature(settings_.temperature);
    if (settings_.depth_limit < 1) throw std::invalid_argument("depth limit must be at least 1");
    if (settings_.rounds < 1) throw std::invalid_argument("rounds must be at least 1");
    backend_ = make_backend(settings_);
    if (settings_.cache_file) cache_ = oracle::OracleCache::load(*settings_.cache_file);
    corrections_ = oracle::CorrectionRules::seeded();
    if (settings_.corrections_file) corrections_.load_file(*settings_.corrections_file);
    oracle_ = std::make_unique<oracle::Oracle>(cache_, corrections_, backend_.get(), settings_.retry);
}

Session::~Session() = default;

Stage Session::load_program(ProgramExport program, std::vector<Diagnostic> diagnostics) {
    Stage s;
    s.subject = sanitize(program.name);
    s.program = std::move(program);
    s.diagnostics = std::move(diagnostics);
    return s;
}

Stage Session::load(const fs::path& export_path) {
    auto loaded = ingest::load(export_path);
    return load_program(std::move(loaded.program), std::move(loaded.diagnostics));
}

void Session::identify(Stage& s) {
    const bool need_oracle = !settings_.sinks_file || !settings_.sources_file;
    oracle::Identified found;
    if (need_oracle) found = oracle_->identify(s.program);
    s.sinks = settings_.sinks_file ? oracle::load_spec_list(*settings_.sinks_file, Role::sink) : found.sinks;
    s.sources = settings_.sources_file ? oracle::load_spec_list(*settings_.sources_file, Role::source) : found.sources;
    s.diagnostics.insert(s.diagnostics.end(), found.diagnostics.begin(), found.diagnostics.end());
}

void Session::slice(Stage& s) {
    const auto t0 = Clock::now();
    auto effects = dataflow::EffectTable::builtin();
    if (settings_.effects_file) effects.load_overrides_file(*settings_.effects_file);
    effects.add_sources(s.sources);
    ProgramIndex index(s.program, effects);
    for (const auto& d : index.diagnostics()) {
        // unparseable bodies are already reported by validation at load time
        if (d.location.rfind("functions/", 0) != 0) s.diagnostics.push_back(d);
    }
    s.vds = slicer::locate_vds(index, s.sinks);
    s.chains.clear();
    slicer::SliceOptions opts;
    opts.depth_limit = settings_.depth_limit;
    for (const auto& vd : s.vds) {
        auto r = slicer::backward_slice(index, vd, opts);
        s.chains.insert(s.chains.end(), r.chains.begin(), r.chains.end());
        s.diagnostics.insert(s.diagnostics.end(), r.diagnostics.begin(), r.diagnostics.end());
    }
    s.stage = "slice";
    s.seconds += seconds_since(t0);
}

void Session::flows(Stage& s) {
    const auto t0 = Clock::now();
    auto effects = dataflow::EffectTable::builtin();
    if (settings_.effects_file) effects.load_overrides_file(*settings_.effects_file);
    effects.add_sources(s.sources);
    ProgramIndex index(s.program, effects);
    s.flows = flowgen::dedup(flowgen::match_sources(index, s.chains, s.sources));
    flowgen::assign_ids(s.flows, s.subject);
    s.stage = "flows";
    s.seconds += seconds_since(t0);
}

void Session::prompts(Stage& s) {
    s.prompts.clear();
    for (const auto& df : s.flows) {
        try {
            s.prompts.push_back(promptchat::build_prompt_sequence(df, s.program));
        } catch (const promptchat::PromptError& e) {
            s.diagnostics.push_back({Severity::warning, "prompts/" + df.id, e.what()});
        }
    }
    s.stage = "prompts";
}

Stage Session::prepare(const fs::path& export_path) {
    Stage s = load(export_path);
    identify(s);
    slice(s);
    flows(s);
    prompts(s);
    return s;
}

std::vector<Verdict> Session::analyze(const Stage& s) {
    promptchat::ConversationOptions opts;
    opts.retry = settings_.retry;
    opts.max_prompt_chars = settings_.max_prompt_chars;
    std::vector<Verdict> out;
    for (const auto& ps : s.prompts) out.push_back(promptchat::run_conversation(ps, *backend_, opts, s.subject));
    return out;
}

void Session::save_cache() {
    if (settings_.cache_file) cache_.save(*settings_.cache_file);
}

// ---------------------------------------------------------------------------
// Run directory

void write_run(const std::vector<Stage>& stages, const fs::path& out_dir, Session& session) {
    fs::create_directories(out_dir);
    fs::remove_all(out_dir / "results");
    fs::remove_all(out_dir / "prompts");
    fs::remove(out_dir / "metrics.json");
    fs::remove(out_dir / "labels.json");
    fs::create_directories(out_dir / "prompts");

    std::vector<const Stage*> ordered;
    for (const auto& s : stages) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(), [](const Stage* a, const Stage* b) { return a->subject < b->subject; });
    for (std::size_t i = 1; i < ordered.size(); ++i) {
        if (ordered[i]->subject == ordered[i - 1]->subject) {
            throw std::invalid_argument("duplicate subject '" + ordered[i]->subject + "'");
        }
    }

    json subjects = json::array();
    std::vector<json> manifest;
    std::vector<json> diags;
    for (const Stage* s : ordered) {
        subjects.push_back({{"subject", s->subject},
                            {"functions", s->program.functions.size()},
                            {"sinks", s->sinks},
                            {"sources", s->sources},
                            {"vds", s->vds.size()},
                            {"chains", s->chains.size()},
                            {"flows", s->flows.size()}});
        for (const auto& df : s->flows) {
            json j = df;
            j["subject"] = s->subject;
            manifest.push_back(std::move(j));
        }
        for (const auto& d : s->diagnostics) {
            json j = d;
            j["subject"] = s->subject;
            diags.push_back(std::move(j));
        }
        for (const auto& ps : s->prompts) write_json_file(out_dir / "prompts" / (ps.df_id + ".json"), ps);
    }
    write_json_file(out_dir / "subjects.json", subjects);
    write_text(out_dir / "manifest.jsonl", jsonl(manifest));
    write_text(out_dir / "diagnostics.jsonl", jsonl(diags));

    const auto& settings = session.settings();
    json timings = json::array();
    for (int round = 1; round <= settings.rounds; ++round) {
        const fs::path round_dir = out_dir / "results" / ("round-" + std::to_string(round));
        fs::create_directories(round_dir);
        std::vector<double> secs(ordered.size(), 0.0);
        parallel_for(ordered.size(), settings.jobs, [&](std::size_t i) {
            const auto t0 = Clock::now();
            auto verdicts = session.analyze(*ordered[i]);
            secs[i] = ordered[i]->seconds + seconds_since(t0);
            for (const auto& v : verdicts) write_json_file(round_dir / (v.df_id + ".json"), v);
        });
        json per_subject = json::object();
        for (std::size_t i = 0; i < ordered.size(); ++i) per_subject[ordered[i]->subject] = secs[i];
        timings.push_back({{"round", round}, {"seconds", per_subject}});
    }
    write_json_file(out_dir / "timings.json", timings);

    if (settings.labels_file) {
        auto labels = report::load_labels(*settings.labels_file);
        write_json_file(out_dir / "labels.json", report::labels_to_json(labels));
        write_json_file(out_dir / "metrics.json", to_json(score_run(out_dir, labels)));
    }
    session.save_cache();
}

void run(const std::vector<fs::path>& exports, const fs::path& out_dir, Session& session) {
    const auto inputs = expand_inputs(exports);
    std::vector<Stage> stages(inputs.size());
    parallel_for(inputs.size(), session.settings().jobs, [&](std::size_t i) { stages[i] = session.prepare(inputs[i]); });
    write_run(stages, out_dir, session);
}

std::vector<Verdict> read_verdicts(const fs::path& round_dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(round_dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Verdict> out;
    for (const auto& f : files) out.push_back(read_json_file(f).get<Verdict>());
    return out;
}

RunScore score_run(const fs::path& run_dir, const report::Labels& labels) {
    std::vector<std::string> scope;
    for (const auto& s : read_json_file(run_dir / "subjects.json")) scope.push_back(s.at("subject").get<std::string>());
    json timings = fs::exists(run_dir / "timings.json") ? read_json_file(run_dir / "timings.json") : json::array();

    std::vector<fs::path> rounds;
    if (fs::exists(run_dir / "results")) {
        for (const auto& e : fs::directory_iterator(run_dir / "results")) {
            if (e.is_directory() && e.path().filename().string().rfind("round-", 0) == 0) rounds.push_back(e.path());
        }
    }
    std::sort(rounds.begin(), rounds.end(), [](const fs::path& a, const fs::path& b) {
        return std::stoi(a.filename().string().substr(6)) < std::stoi(b.filename().string().substr(6));
    });

    RunScore out;
    bool first = true;
    for (const auto& rd : rounds) {
        const int k = std::stoi(rd.filename().string().substr(6));
        std::map<std::string, double> secs;
        for (const auto& t : timings) {
            if (t.at("round").get<int>() != k) continue;
            for (const auto& [subject, v] : t.at("seconds").items()) secs[subject] = v.get<double>();
        }
        auto verdicts = read_verdicts(rd);
        out.rounds.push_back(report::score(verdicts, labels, scope, secs));
        auto tps = report::true_positives(verdicts, labels);
        std::set<std::string> in_scope;
        for (const auto& s : tps) {
            if (std::find(scope.begin(), scope.end(), s) != scope.end()) in_scope.insert(s);
        }
        if (first) {
            out.tp_intersection = in_scope;
            first = false;
        } else {
            std::set<std::string> keep;
            std::set_intersection(out.tp_intersection.begin(), out.tp_intersection.end(), in_scope.begin(),
                                  in_scope.end(), std::inserter(keep, keep.begin()));
            out.tp_intersection = std::move(keep);
        }
    }
    return out;
}

json to_json(const RunScore& s) {
    json rounds = json::array();
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
        rounds.push_back({{"round", i + 1}, {"table", report::to_json(s.rounds[i])}});
    }
    return {{"rounds", rounds}, {"tp_intersection", s.tp_intersection}};
}

std::string render(const RunScore& s) {
    std::ostringstream out;
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
        out << "round " << (i + 1) << "\n" << report::render_table(s.rounds[i]) << "\n";
    }
    if (s.rounds.size() > 1) {
        out << "TP in every round (" << s.tp_intersection.size() << "):";
        for (const auto& t : s.tp_intersection) out << " " << t;
        out << "\n";
    }
    return out.str();
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
    std::vector<fs::path> out;
    for (const auto& p : inputs) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace taintchain::pipeline
