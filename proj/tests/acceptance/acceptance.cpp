// One PASS/FAIL line per acceptance criterion. Mock backend only.

#include "taintchain/flowgen.hpp"
#include "taintchain/pipeline.hpp"
#include "taintchain/promptchat.hpp"
#include "taintchain/report.hpp"
#include "taintchain/slicer.hpp"

#include "../unit/test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace taintchain;
using namespace taintchain::test;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_seconds > 0 && secs >= budget_seconds) {
        o.ok = false;
        o.detail += " (over time budget)";
    }
    if (!o.ok) ++failures;
    std::printf("%s %-22s %8.3fs  %s\n", o.ok ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

using Seq = std::vector<std::string>;

const std::vector<FuncSpec> kFig10Sources{source("fgets", ParamSelector::index(1)),
                                          source("recv", ParamSelector::index(2))};

// Linear program of n functions: g{n-1} reads into buf with fgets and passes
// it down to g0, which hands it to system.
ProgramExport linear_flow(int n) {
    std::vector<FunctionRecord> fs;
    for (int i = 0; i < n; ++i) {
        const std::string id = "g" + std::to_string(i);
        std::string body;
        if (i == n - 1) {
            body = "void " + id + "(void)\n{\n  char buf [64];\n  fgets(buf,64,stdin);\n  ";
            body += i == 0 ? "system(buf);\n" : "g" + std::to_string(i - 1) + "(buf);\n";
            body += "  return;\n}";
            fs.push_back(function(id, {}, body));
        } else {
            body = "void " + id + "(char *p)\n{\n  ";
            body += i == 0 ? "system(p);\n" : "g" + std::to_string(i - 1) + "(p);\n";
            body += "  return;\n}";
            fs.push_back(function(id, {{"p", "char *"}}, body));
        }
    }
    return program("linear" + std::to_string(n), std::move(fs), {"fgets", "system"});
}

bool contiguous_in(const Seq& needle, const Seq& hay) {
    return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace

int main() {
    criterion("fig3-vds", 1.0, [] {
        auto index = make_index(load_fixture("fig3.json"));
        std::set<std::string> got;
        for (const auto& vd : slicer::locate_vds(index, {sink("printf", ParamSelector::all_from(1))})) {
            got.insert(to_string(vd));
        }
        const std::set<std::string> want{"(9; printf; e)", "(15; printf; c)", "(18; printf; d)"};
        std::string detail;
        for (const auto& s : got) detail += s + " ";
        return Outcome{got == want, detail};
    });

    criterion("fig10-flows", 1.0, [] {
        auto index = make_index(load_fixture("fig10.json"), kFig10Sources);
        auto vds = slicer::locate_vds(index, {sink("system", ParamSelector::index(1))});
        if (vds.size() != 1 || to_string(vds[0]) != "(10; system; a)") return Outcome{false, "unexpected VDs"};
        auto chains = slicer::backward_slice(index, vds[0]).chains;
        std::set<Seq> tails;
        for (const auto& c : chains) tails.insert(Seq(c.funcs.end() - 2, c.funcs.end()));
        auto flows = flowgen::dedup(flowgen::match_sources(index, chains, kFig10Sources));
        std::set<Seq> got;
        for (const auto& f : flows) got.insert(f.chain.funcs);
        const bool ok = tails == std::set<Seq>{{"fun2", "fun1"}, {"fun3", "fun1"}} &&
                        got == std::set<Seq>{{"fun2", "fun1"}, {"fun6", "fun4", "fun3", "fun1"}} &&
                        flows.size() == got.size();
        return Outcome{ok, std::to_string(chains.size()) + " chains, " + std::to_string(flows.size()) + " flows"};
    });

    criterion("depth-limit", 1.0, [] {
        auto index = make_index(linear_chain(60));
        auto vds = slicer::locate_vds(index, {sink("system", ParamSelector::index(1))});
        auto chains = slicer::backward_slice(index, vds.at(0)).chains;
        const bool ok = chains.size() == 1 && chains[0].funcs.size() == 50;
        return Outcome{ok, "chain length " + (chains.empty() ? std::string("-") : std::to_string(chains[0].funcs.size()))};
    });

    criterion("dedup-equivalence", 0, [] {
        std::mt19937 rng(2024);
        int agree = 0;
        const int trials = 500;
        for (int t = 0; t < trials; ++t) {
            std::vector<DangerousFlow> input;
            const int n = static_cast<int>(rng() % 7);
            for (int i = 0; i < n; ++i) {
                DangerousFlow df;
                const int len = 1 + static_cast<int>(rng() % 5);
                for (int k = 0; k < len - 1; ++k) df.chain.funcs.push_back(std::string(1, "abcd"[rng() % 4]));
                df.chain.funcs.push_back("v");
                df.chain.vd = {"v", 1 + static_cast<int>(rng() % 2), "system", {"x"}, {1}};
                input.push_back(std::move(df));
            }
            std::set<std::pair<int, Seq>> want;
            for (const auto& f : input) {
                bool covered = false;
                for (const auto& g : input) {
                    if (f.chain.vd == g.chain.vd && flowgen::is_subchain(f.chain.funcs, g.chain.funcs)) covered = true;
                }
                if (!covered) want.insert({f.chain.vd.site_line, f.chain.funcs});
            }
            auto out = flowgen::dedup(input);
            std::set<std::pair<int, Seq>> got;
            for (const auto& f : out) got.insert({f.chain.vd.site_line, f.chain.funcs});
            if (got == want && out.size() == want.size()) ++agree;
        }
        return Outcome{agree == trials, std::to_string(agree) + "/" + std::to_string(trials)};
    });

    criterion("prompt-law", 0, [] {
        int good = 0;
        for (int n = 1; n <= 6; ++n) {
            auto exp = linear_flow(n);
            const std::vector<FuncSpec> sources{source("fgets", ParamSelector::index(1))};
            auto index = make_index(exp, sources);
            auto vds = slicer::locate_vds(index, {sink("system", ParamSelector::index(1))});
            auto flows = flowgen::dedup(flowgen::match_sources(index, slicer::backward_slice(index, vds.at(0)).chains, sources));
            if (flows.size() != 1 || flows[0].chain.funcs.size() != static_cast<std::size_t>(n)) continue;
            auto ps = promptchat::build_prompt_sequence(flows[0], exp);
            bool ok = ps.prompts.size() == static_cast<std::size_t>(n) + 1;
            for (std::size_t i = 0; ok && i < ps.prompts.size(); ++i) {
                const auto want = i == 0 ? PromptKind::start : i == ps.prompts.size() - 1 ? PromptKind::end : PromptKind::middle;
                const char* anchor = want == PromptKind::start    ? promptchat::kStartAnchor
                                     : want == PromptKind::middle ? promptchat::kMiddleAnchor
                                                                  : promptchat::kEndAnchor;
                ok = ps.prompts[i].kind == want && ps.prompts[i].text.find(anchor) != std::string::npos;
            }
            if (ok) ++good;
        }
        return Outcome{good == 6, std::to_string(good) + "/6 lengths"};
    });

    criterion("fig11-replay", 0, [] {
        auto exp = load_fixture("fig3.json");
        const std::vector<FuncSpec> sources{source("fscanf", ParamSelector::after(2))};
        auto index = make_index(exp, sources);
        auto vds = slicer::locate_vds(index, {sink("printf", ParamSelector::all_from(1))});
        auto flows = flowgen::match_sources(index, slicer::backward_slice(index, vds.at(1)).chains, sources);
        if (flows.size() != 1 || flows[0].chain.funcs != Seq{"foo"}) return Outcome{false, "no single-function flow"};
        auto ps = promptchat::build_prompt_sequence(flows[0], exp);
        llm::MockBackend backend(llm::load_mock_script(data_dir() / "fig3_mock.json"));
        auto v = promptchat::run_conversation(ps, backend);
        const bool ok = v.vulnerable == Vulnerability::yes && v.cwe_tags == std::vector<std::string>{"CWE-190"};
        return Outcome{ok, to_string(v.vulnerable) + (v.cwe_tags.empty() ? "" : " " + v.cwe_tags[0])};
    });

    criterion("metrics-arithmetic", 0, [] {
        auto r = report::compute_row("CWE-78", {892, 68, 960, 0});
        bool ok = std::fabs(*r.accuracy * 100 - 96.46) <= 0.01 && std::fabs(*r.f1 * 100 - 96.33) <= 0.01;
        char buf[96];
        std::snprintf(buf, sizeof buf, "acc %.2f%% f1 %.2f%%", *r.accuracy * 100, *r.f1 * 100);
        std::mt19937 rng(77);
        std::uniform_int_distribution<long> count(1, 5000);
        int exact = 0;
        for (int i = 0; i < 200; ++i) {
            report::Confusion c{count(rng), count(rng), count(rng), count(rng)};
            auto row = report::compute_row("X", c);
            const double tp = c.tp, fn = c.fn, tn = c.tn, fp = c.fp;
            const double p = tp / (tp + fp), rec = tp / (tp + fn);
            if (*row.accuracy == (tp + tn) / (tp + tn + fp + fn) && *row.precision == p && *row.recall == rec &&
                *row.f1 == 2 * p * rec / (p + rec)) {
                ++exact;
            }
        }
        return Outcome{ok && exact == 200, std::string(buf) + ", " + std::to_string(exact) + "/200 exact"};
    });

    criterion("mini-corpus", 10.0, [] {
        const auto root = data_dir() / "corpus";
        const json planted = json::parse(slurp(root / "planted.json"));
        pipeline::Settings settings;
        settings.mock_script = root / "mock.json";
        pipeline::Session session(settings);
        std::map<std::string, std::vector<DangerousFlow>> flows;
        for (const auto& path : pipeline::expand_inputs({root / "exports"})) {
            auto stage = session.prepare(path);
            flows[stage.subject] = stage.flows;
        }
        int covered = 0;
        std::string missing;
        for (const auto& [subject, p] : planted.items()) {
            // every flow extracted for the subject must cover the planted path
            const auto& found = flows[subject];
            const bool hit = !found.empty() && std::all_of(found.begin(), found.end(), [&](const DangerousFlow& df) {
                const auto& vd = df.chain.vd;
                if (vd.function_id != p["sink"]["function"] || vd.site_line != p["sink"]["line"]) return false;
                const bool source_ok = std::any_of(df.source_calls.begin(), df.source_calls.end(), [&](const SourceCall& s) {
                    return s.function_id == p["source"]["function"] && s.site_line == p["source"]["line"];
                });
                const bool chain_ok = std::any_of(p["chains"].begin(), p["chains"].end(), [&](const json& c) {
                    return contiguous_in(c.get<Seq>(), df.chain.funcs);
                });
                return source_ok && chain_ok;
            });
            if (hit) {
                ++covered;
            } else {
                missing += " " + subject;
            }
        }
        const int total = static_cast<int>(planted.size());
        return Outcome{total == 20 && covered >= 19,
                       std::to_string(covered) + "/" + std::to_string(total) + (missing.empty() ? "" : " missing:" + missing)};
    });

    criterion("determinism", 0, [] {
        const auto root = data_dir() / "corpus";
        const auto out = fs::temp_directory_path() / "taintchain_acceptance";
        fs::remove_all(out);
        for (const char* name : {"a", "b"}) {
            pipeline::Settings settings;
            settings.mock_script = root / "mock.json";
            settings.jobs = name[0] == 'a' ? 1 : 3;
            pipeline::Session session(settings);
            pipeline::run(pipeline::expand_inputs({root / "exports"}), out / name, session);
        }
        int files = 0;
        int differing = 0;
        for (const auto& e : fs::recursive_directory_iterator(out / "a")) {
            if (!e.is_regular_file()) continue;
            const auto rel = fs::relative(e.path(), out / "a");
            const bool compared = rel == "manifest.jsonl" || rel.begin()->string() == "results";
            if (!compared) continue;
            ++files;
            if (slurp(e.path()) != slurp(out / "b" / rel)) ++differing;
        }
        return Outcome{files > 1 && differing == 0,
                       std::to_string(files) + " files compared, " + std::to_string(differing) + " differ"};
    });

    std::printf("%s\n", failures == 0 ? "ALL PASS" : "SOME CRITERIA FAILED");
    return failures == 0 ? 0 : 1;
}
