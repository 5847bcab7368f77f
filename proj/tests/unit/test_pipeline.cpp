#include "taintchain/pipeline.hpp"

#include "test_support.hpp"

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace taintchain::test {

namespace {

namespace fs = std::filesystem;

int cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(TAINTCHAIN_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Relative path -> contents for every file under `dir`, minus timings.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "timings.json") continue;
        out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return out;
}

std::string corpus(const std::string& rel) { return (data_dir() / "corpus" / rel).string(); }

}  // namespace

TEST(Session, Fig3ScriptedReplay) {
    pipeline::Settings settings;
    settings.mock_script = data_dir() / "fig3_mock.json";
    settings.retry.backoff = std::chrono::milliseconds(0);
    pipeline::Session session(settings);
    auto stage = session.prepare(data_dir() / "fig3.json");
    EXPECT_EQ(stage.stage, "prompts");
    ASSERT_EQ(stage.flows.size(), 3u);
    EXPECT_EQ(stage.sources, (std::vector<FuncSpec>{source("fscanf", ParamSelector::after(2))}));
    auto verdicts = session.analyze(stage);
    ASSERT_EQ(verdicts.size(), 3u);
    for (const auto& v : verdicts) {
        EXPECT_EQ(v.vulnerable, Vulnerability::yes);
        EXPECT_EQ(v.cwe_tags, (std::vector<std::string>{"CWE-190"}));
        EXPECT_EQ(v.transcript.messages.size(), 4u);
    }
}

TEST(Stage, JsonRoundTrip) {
    pipeline::Session session({});
    auto stage = session.prepare(data_dir() / "fig10.json");
    auto back = pipeline::stage_from_json(stage_to_json(stage));
    EXPECT_EQ(back.program, stage.program);
    EXPECT_EQ(back.flows, stage.flows);
    EXPECT_EQ(back.chains, stage.chains);
    EXPECT_EQ(back.vds, stage.vds);
    EXPECT_EQ(back.sinks, stage.sinks);
    EXPECT_EQ(back.diagnostics, stage.diagnostics);
    EXPECT_EQ(pipeline::sanitize("a/b c:d"), "a_b_c_d");
}

TEST(Cli, StagesComposeToRun) {
    auto dir = fresh_dir("cli_compose");
    const auto fig10 = (data_dir() / "fig10.json").string();
    const auto d = dir.string();
    ASSERT_EQ(cli("slice " + fig10 + " -o " + d + "/s.json", dir / "log1"), 0) << slurp(dir / "log1");
    ASSERT_EQ(cli("flows " + d + "/s.json -o " + d + "/f.json", dir / "log2"), 0) << slurp(dir / "log2");
    ASSERT_EQ(cli("prompts " + d + "/f.json -o " + d + "/p.json", dir / "log3"), 0) << slurp(dir / "log3");
    ASSERT_EQ(cli("analyze " + d + "/p.json -o " + d + "/staged", dir / "log4"), 0) << slurp(dir / "log4");
    ASSERT_EQ(cli("run " + fig10 + " -o " + d + "/direct", dir / "log5"), 0) << slurp(dir / "log5");

    auto staged = tree(dir / "staged");
    EXPECT_EQ(staged, tree(dir / "direct"));
    ASSERT_TRUE(staged.count("manifest.jsonl"));
    const auto& manifest = staged["manifest.jsonl"];
    // two flows into system plus the strcpy and strcat sites in fun4
    EXPECT_EQ(std::count(manifest.begin(), manifest.end(), '\n'), 4);
    EXPECT_TRUE(staged.count("results/round-1/fig10-df001.json"));
}

TEST(Cli, ValidateAndErrors) {
    auto dir = fresh_dir("cli_validate");
    EXPECT_EQ(cli("validate " + (data_dir() / "fig3.json").string(), dir / "log"), 0);
    std::ofstream(dir / "broken.json") << "{\"name\": 1}";
    EXPECT_EQ(cli("validate " + (dir / "broken.json").string(), dir / "log"), 1);
    EXPECT_NE(slurp(dir / "log").find("name"), std::string::npos);
    EXPECT_NE(cli("run " + (data_dir() / "fig3.json").string() + " -o " + dir.string() + "/r --temperature 3",
                  dir / "log"),
              0);
}

TEST(Cli, ShippedConfigFiles) {
    auto dir = fresh_dir("cli_config");
    const auto cfg = fs::path(TAINTCHAIN_SOURCE_DIR) / "config";
    const std::string flags = " --effects " + (cfg / "effects.txt").string() + " --corrections " +
                              (cfg / "corrections.txt").string() + " --sinks-file " + (cfg / "sinks.txt").string() +
                              " --sources-file " + (cfg / "sources.txt").string();
    ASSERT_EQ(cli("run " + (data_dir() / "fig10.json").string() + flags + " -o " + (dir / "out").string(), dir / "log"), 0)
        << slurp(dir / "log");
    const auto manifest = slurp(dir / "out" / "manifest.jsonl");
    EXPECT_NE(manifest.find("\"fun6\",\"fun4\",\"fun3\",\"fun1\""), std::string::npos);
}

TEST(Cli, ZeroSinksGivesEmptyManifest) {
    auto dir = fresh_dir("cli_empty");
    auto exp = program("quiet", {function("main", {}, "int main(void)\n{\n  return 0;\n}")});
    std::ofstream(dir / "quiet.json") << encode_export(exp).dump();
    ASSERT_EQ(cli("run " + (dir / "quiet.json").string() + " -o " + (dir / "out").string(), dir / "log"), 0)
        << slurp(dir / "log");
    ASSERT_TRUE(fs::exists(dir / "out" / "manifest.jsonl"));
    EXPECT_EQ(slurp(dir / "out" / "manifest.jsonl"), "");
}

TEST(Cli, ScoreReproducesRunMetrics) {
    auto dir = fresh_dir("cli_score");
    const auto out = (dir / "run").string();
    ASSERT_EQ(cli("run " + corpus("exports") + " --labels " + corpus("labels.json") + " --mock-script " +
                      corpus("mock.json") + " --rounds 2 -o " + out,
                  dir / "log"),
              0)
        << slurp(dir / "log");
    ASSERT_EQ(cli("score " + out + " -o " + (dir / "again.json").string(), dir / "log2"), 0) << slurp(dir / "log2");
    EXPECT_EQ(json::parse(slurp(dir / "again.json")), json::parse(slurp(dir / "run" / "metrics.json")));

    auto scored = pipeline::score_run(dir / "run", report::load_labels(corpus("labels.json")));
    ASSERT_EQ(scored.rounds.size(), 2u);
    EXPECT_EQ(scored.rounds[0].rows.back().counts, (report::Confusion{18, 2, 3, 1}));
    EXPECT_EQ(scored.tp_intersection.size(), 18u);
    EXPECT_EQ(scored.tp_intersection.count("s10"), 0u);
    EXPECT_EQ(scored.tp_intersection.count("s19"), 0u);
}

TEST(Cli, DeterministicAcrossJobCounts) {
    auto dir = fresh_dir("cli_determinism");
    const std::string common = "run " + corpus("exports") + " --mock-script " + corpus("mock.json") + " -o ";
    ASSERT_EQ(cli(common + (dir / "a").string() + " --jobs 1", dir / "log"), 0) << slurp(dir / "log");
    ASSERT_EQ(cli(common + (dir / "b").string() + " --jobs 4", dir / "log"), 0) << slurp(dir / "log");
    auto a = tree(dir / "a");
    EXPECT_EQ(a, tree(dir / "b"));
    EXPECT_GT(a.size(), 20u);
}

}  // namespace taintchain::test
