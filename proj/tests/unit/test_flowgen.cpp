#include "taintchain/flowgen.hpp"
#include "taintchain/slicer.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

namespace taintchain::test {

namespace {

const std::vector<FuncSpec> kFig10Sources{source("fgets", ParamSelector::index(1)),
                                          source("recv", ParamSelector::index(2))};

std::vector<DangerousFlow> fig10_flows(const std::vector<FuncSpec>& sources) {
    auto index = make_index(load_fixture("fig10.json"), sources);
    auto vds = slicer::locate_vds(index, {sink("system", ParamSelector::index(1))});
    auto chains = slicer::backward_slice(index, vds.at(0)).chains;
    return flowgen::dedup(flowgen::match_sources(index, chains, sources));
}

DangerousFlow flow(std::vector<std::string> funcs, int vd_line = 10) {
    DangerousFlow df;
    df.chain.funcs = std::move(funcs);
    df.chain.vd = {df.chain.funcs.back(), vd_line, "system", {"a"}, {1}};
    return df;
}

using Seq = std::vector<std::string>;

std::set<std::pair<int, Seq>> keys(const std::vector<DangerousFlow>& flows) {
    std::set<std::pair<int, Seq>> out;
    for (const auto& f : flows) out.insert({f.chain.vd.site_line, f.chain.funcs});
    return out;
}

}  // namespace

TEST(SourceTaint, Forms) {
    auto ir = pseudoc::parse_function(
        "void g(void)\n{\n  char buf [8];\n  char *e;\n  int n;\n  fgets(buf,8,stdin);\n  e = getenv(\"HOME\");\n  "
        "fscanf(stdin,\"%d\",&n);\n  return;\n}");
    auto sites = pseudoc::all_call_sites(ir);
    ASSERT_EQ(sites.size(), 3u);
    EXPECT_TRUE(flowgen::source_taint(sites[0], ParamSelector::index(1)).count("buf"));
    EXPECT_EQ(flowgen::source_taint(sites[1], ParamSelector::return_value()), (std::set<std::string>{"e"}));
    EXPECT_EQ(flowgen::source_taint(sites[2], ParamSelector::after(2)), (std::set<std::string>{"n"}));
}

TEST(MatchSources, Fig10) {
    auto flows = fig10_flows(kFig10Sources);
    ASSERT_EQ(flows.size(), 2u);
    EXPECT_EQ(flows[0].chain.funcs, (Seq{"fun2", "fun1"}));
    ASSERT_EQ(flows[0].source_calls.size(), 1u);
    EXPECT_EQ(flows[0].source_calls[0].function_id, "fun2");
    EXPECT_EQ(flows[0].source_calls[0].site_line, 10);
    EXPECT_EQ(flows[0].source_calls[0].spec.name, "fgets");
    EXPECT_EQ(flows[0].source_calls[0].positions, (std::vector<int>{1}));

    EXPECT_EQ(flows[1].chain.funcs, (Seq{"fun6", "fun4", "fun3", "fun1"}));
    ASSERT_EQ(flows[1].source_calls.size(), 2u);
    EXPECT_EQ(flows[1].source_calls[0].spec.name, "recv");
    EXPECT_EQ(flows[1].source_calls[1].spec.name, "fgets");
    EXPECT_EQ(flows[1].source_calls[1].function_id, "fun4");
    EXPECT_EQ(flows[1].chain.binding_trace.size(), 4u);
}

TEST(MatchSources, NoSources) { EXPECT_TRUE(fig10_flows({}).empty()); }

TEST(MatchSources, LongestCandidatePerChain) {
    auto index = make_index(load_fixture("fig10.json"), kFig10Sources);
    auto vds = slicer::locate_vds(index, {sink("system", ParamSelector::index(1))});
    auto chains = slicer::backward_slice(index, vds.at(0)).chains;
    auto candidates = flowgen::match_sources(index, chains, kFig10Sources);
    std::set<Seq> seqs;
    for (const auto& c : candidates) seqs.insert(c.chain.funcs);
    EXPECT_EQ(seqs, (std::set<Seq>{{"fun2", "fun1"}, {"fun4", "fun3", "fun1"}, {"fun6", "fun4", "fun3", "fun1"}}));
    EXPECT_EQ(candidates.size(), 3u);
}

TEST(MatchSources, SourceInSinkFunction) {
    auto index = make_index(load_fixture("fig3.json"), {source("fscanf", ParamSelector::after(2))});
    auto vds = slicer::locate_vds(index, {sink("printf", ParamSelector::all_from(1))});
    for (const auto& vd : vds) {
        auto flows = flowgen::match_sources(index, slicer::backward_slice(index, vd).chains,
                                            {source("fscanf", ParamSelector::after(2))});
        ASSERT_EQ(flows.size(), 1u);
        EXPECT_EQ(flows[0].chain.funcs, (Seq{"foo"}));
        EXPECT_EQ(flows[0].source_calls[0].site_line, 4);
        EXPECT_EQ(flows[0].source_calls[0].positions, (std::vector<int>{3}));
    }
}

TEST(Dedup, Examples) {
    auto out = flowgen::dedup({flow({"c"}), flow({"b", "c"}), flow({"a", "b", "c"}), flow({"x", "c"}), flow({"b", "c"}, 12)});
    EXPECT_EQ(keys(out), (std::set<std::pair<int, Seq>>{{10, {"a", "b", "c"}}, {10, {"x", "c"}}, {12, {"b", "c"}}}));
    EXPECT_EQ(flowgen::dedup({flow({"f"})}).size(), 1u);
    EXPECT_EQ(flowgen::dedup({flow({"f"}), flow({"f"})}).size(), 1u);
    EXPECT_TRUE(flowgen::is_subchain({"b", "c"}, {"a", "b", "c"}));
    EXPECT_FALSE(flowgen::is_subchain({"a", "b"}, {"a", "b", "c"}));
    EXPECT_FALSE(flowgen::is_subchain({"a", "b"}, {"a", "b"}));
}

TEST(Dedup, AssignIds) {
    auto flows = flowgen::dedup({flow({"a", "c"}), flow({"b", "c"})});
    flowgen::assign_ids(flows, "cwe78_demo");
    EXPECT_EQ(flows[0].id, "cwe78_demo-df001");
    EXPECT_EQ(flows[1].id, "cwe78_demo-df002");
}

TEST(DedupProperties, MatchesBruteForceAndIsIdempotent) {
    std::mt19937 rng(17);
    for (int round = 0; round < 300; ++round) {
        std::vector<DangerousFlow> input;
        for (int i = 0, n = static_cast<int>(rng() % 8); i < n; ++i) {
            Seq s;
            for (int k = 0, len = 1 + static_cast<int>(rng() % 3); k < len; ++k) s.push_back(std::string(1, "abc"[rng() % 3]));
            s.push_back("z");
            input.push_back(flow(s, 10 + static_cast<int>(rng() % 2)));
        }
        std::set<std::pair<int, Seq>> expected;
        for (const auto& f : input) {
            bool covered = false;
            for (const auto& g : input) {
                const auto& a = f.chain.funcs;
                const auto& b = g.chain.funcs;
                if (f.chain.vd == g.chain.vd && a.size() < b.size() && std::equal(a.rbegin(), a.rend(), b.rbegin())) {
                    covered = true;
                }
            }
            if (!covered) expected.insert({f.chain.vd.site_line, f.chain.funcs});
        }
        auto out = flowgen::dedup(input);
        EXPECT_EQ(keys(out), expected);
        EXPECT_EQ(out.size(), expected.size()) << "duplicates survived";
        EXPECT_EQ(flowgen::dedup(out), out);
    }
}

}  // namespace taintchain::test
