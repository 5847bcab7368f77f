#include "taintchain/llm_backend.hpp"
#include "taintchain/oracle.hpp"

#include "test_support.hpp"

#include <atomic>
#include <thread>

#include <gtest/gtest.h>

namespace taintchain::test {

namespace {

using oracle::Outcome;

constexpr llm::RetryPolicy kNoWait{3, std::chrono::milliseconds(0), 1.0};

class SlowBackend : public llm::LlmBackend {
public:
    explicit SlowBackend(std::string reply) : reply_(std::move(reply)) {}
    std::string complete(const std::vector<ChatMessage>&) override {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(60));
        return reply_;
    }
    ModelParams params() const override { return {"slow", 0.5, "1970-01-01T00:00:00Z"}; }
    std::atomic<int> calls{0};

private:
    std::string reply_;
};

oracle::CacheEntry entry(const std::string& name, Role role, Outcome outcome, ParamSelector sel = {}) {
    return {name, role, outcome, std::move(sel), "m", "1970-01-01T00:00:00Z", "raw"};
}

}  // namespace

TEST(Prompts, Wording) {
    EXPECT_EQ(oracle::sink_prompt("printf"),
              "As a program analyst, is it possible to use a call printf as a sink when performing taint analysis? "
              "If so which parameters need to be checked for taint. Please answer yes or no without additional "
              "explanation. If yes, please indicate the corresponding parameters. For example, the system function "
              "can be used as a sink, and the first parameter needs to be checked as (system; 1).");
    EXPECT_NE(oracle::source_prompt("recv").find("use a call to recv as a starting point (source)"), std::string::npos);
}

TEST(ParseSpecReply, Examples) {
    auto printf_reply = oracle::parse_spec_reply(*llm::MockBackend::builtin_reply({{"user", oracle::sink_prompt("printf")}}));
    EXPECT_EQ(printf_reply.outcome, Outcome::positive);
    ASSERT_EQ(printf_reply.specs.size(), 2u);
    EXPECT_EQ(printf_reply.specs[0].second.merged(printf_reply.specs[1].second), ParamSelector::all_from(1));

    auto no = oracle::parse_spec_reply("No.");
    EXPECT_EQ(no.outcome, Outcome::negative);
    EXPECT_TRUE(no.specs.empty());

    EXPECT_EQ(oracle::parse_spec_reply("Yes, definitely useful.").outcome, Outcome::indeterminate);
    EXPECT_EQ(oracle::parse_spec_reply("Perhaps.").outcome, Outcome::indeterminate);

    auto bare = oracle::parse_spec_reply("(recv; 2)");
    EXPECT_EQ(bare.outcome, Outcome::positive);
    EXPECT_EQ(bare.specs.at(0), (std::pair<std::string, ParamSelector>{"recv", ParamSelector::index(2)}));

    EXPECT_EQ(oracle::parse_spec_reply("Yes (getenv; 0)").specs.at(0).second, ParamSelector::return_value());
    EXPECT_EQ(oracle::parse_spec_reply("yes: (fscanf; >2)").specs.at(0).second, ParamSelector::after(2));
    EXPECT_EQ(oracle::parse_spec_reply("Yes. (execv; 1, 2)").specs.at(0).second, ParamSelector::set({1, 2}));
}

TEST(SpecList, Parse) {
    auto specs = oracle::parse_spec_list("# sinks\n(system; 1)\n\n(printf; 1, 2, ...)\n", Role::sink);
    ASSERT_EQ(specs.size(), 2u);
    EXPECT_EQ(specs[0], sink("system", ParamSelector::index(1)));
    EXPECT_EQ(specs[1], sink("printf", ParamSelector::all_from(1)));
    EXPECT_THROW(oracle::parse_spec_list("system 1\n", Role::sink), std::invalid_argument);
}

TEST(Classify, PrintfSinkFromMock) {
    oracle::OracleCache cache;
    llm::MockBackend backend;
    oracle::Oracle o(cache, {}, &backend, kNoWait);
    auto r = o.classify("printf", Role::sink);
    EXPECT_EQ(r.outcome, Outcome::positive);
    EXPECT_EQ(r.spec, sink("printf", ParamSelector::all_from(1)));
    EXPECT_FALSE(r.from_cache);
    EXPECT_TRUE(o.classify("printf", Role::sink).from_cache);
    EXPECT_EQ(o.backend_requests(), 1u);
    EXPECT_EQ(cache.size(), 1u);
}

TEST(Classify, FscanfCorrected) {
    oracle::OracleCache cache;
    llm::MockBackend backend;
    oracle::Oracle raw(cache, {}, &backend, kNoWait);
    EXPECT_EQ(raw.classify("fscanf", Role::source).spec, source("fscanf", ParamSelector::index(2)));

    oracle::OracleCache fresh;
    oracle::Oracle corrected(fresh, oracle::CorrectionRules::seeded(), &backend, kNoWait);
    EXPECT_EQ(corrected.classify("fscanf", Role::source).spec, source("fscanf", ParamSelector::after(2)));
}

TEST(Classify, CacheOnly) {
    oracle::OracleCache cache;
    cache.put(entry("system", Role::sink, Outcome::positive, ParamSelector::index(1)));
    oracle::Oracle o(cache, {}, nullptr);
    auto hit = o.classify("system", Role::sink);
    EXPECT_EQ(hit.outcome, Outcome::positive);
    EXPECT_EQ(hit.spec, sink("system", ParamSelector::index(1)));
    EXPECT_TRUE(hit.from_cache);
    EXPECT_EQ(o.classify("strcpy", Role::sink).outcome, Outcome::indeterminate);
    EXPECT_EQ(o.backend_requests(), 0u);
}

TEST(Classify, IndeterminateEntriesAreRequeried) {
    oracle::OracleCache cache;
    cache.put(entry("recv", Role::source, Outcome::indeterminate));
    oracle::Oracle offline(cache, {}, nullptr);
    EXPECT_EQ(offline.classify("recv", Role::source).outcome, Outcome::indeterminate);

    llm::MockBackend backend;
    oracle::Oracle online(cache, {}, &backend, kNoWait);
    auto r = online.classify("recv", Role::source);
    EXPECT_EQ(r.outcome, Outcome::positive);
    EXPECT_EQ(online.backend_requests(), 1u);
    EXPECT_EQ(cache.get("recv", Role::source)->outcome, Outcome::positive);
}

TEST(Classify, NegativeAndUnparseable) {
    oracle::OracleCache cache;
    llm::MockScript script;
    script.replies = {{"Yes, definitely useful.", std::nullopt}, {"No.", std::nullopt}};
    llm::MockBackend backend(script);
    auto rules = oracle::CorrectionRules::seeded();
    rules.add("puts", Role::sink, ParamSelector::index(1));
    oracle::Oracle o(cache, rules, &backend, kNoWait);
    EXPECT_EQ(o.classify("strlen", Role::sink).outcome, Outcome::indeterminate);
    auto neg = o.classify("puts", Role::sink);
    EXPECT_EQ(neg.outcome, Outcome::negative);
    EXPECT_FALSE(neg.spec.has_value());
}

TEST(Classify, TransportErrorsRetried) {
    oracle::OracleCache cache;
    llm::MockScript script;
    script.replies = {{std::nullopt, llm::BackendError::Kind::transport}, {"Yes. (popen; 1)", std::nullopt}};
    llm::MockBackend backend(script);
    oracle::Oracle o(cache, {}, &backend, kNoWait);
    EXPECT_EQ(o.classify("popen", Role::sink).spec, sink("popen", ParamSelector::index(1)));
    EXPECT_EQ(backend.calls(), 2u);
}

TEST(Classify, ConcurrentCallsCoalesce) {
    oracle::OracleCache cache;
    SlowBackend backend("Yes. (system; 1)");
    oracle::Oracle o(cache, {}, &backend, kNoWait);
    std::vector<std::thread> threads;
    std::vector<oracle::ClassifyResult> results(8);
    for (std::size_t i = 0; i < results.size(); ++i) {
        threads.emplace_back([&, i] { results[i] = o.classify("system", Role::sink); });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(backend.calls.load(), 1);
    for (const auto& r : results) EXPECT_EQ(r.spec, sink("system", ParamSelector::index(1)));
}

TEST(Identify, Fig3Imports) {
    oracle::OracleCache cache;
    llm::MockBackend backend;
    oracle::Oracle o(cache, oracle::CorrectionRules::seeded(), &backend, kNoWait);
    auto ids = o.identify(load_fixture("fig3.json"));
    EXPECT_EQ(ids.sinks, (std::vector<FuncSpec>{sink("printf", ParamSelector::all_from(1))}));
    EXPECT_EQ(ids.sources, (std::vector<FuncSpec>{source("fscanf", ParamSelector::after(2))}));
    EXPECT_TRUE(ids.diagnostics.empty());
    EXPECT_EQ(o.backend_requests(), 6u);
}

TEST(OracleCache, RoundTrip) {
    oracle::OracleCache cache;
    cache.put(entry("system", Role::sink, Outcome::positive, ParamSelector::index(1)));
    cache.put(entry("printf", Role::sink, Outcome::positive, ParamSelector::all_from(1)));
    cache.put(entry("getenv", Role::source, Outcome::positive, ParamSelector::return_value()));
    cache.put(entry("strlen", Role::sink, Outcome::negative));
    cache.put(entry("recv", Role::sink, Outcome::indeterminate));
    auto dir = fresh_dir("cache");
    cache.save(dir / "cache.json");
    EXPECT_EQ(oracle::OracleCache::load(dir / "cache.json").entries(), cache.entries());
    EXPECT_EQ(oracle::OracleCache::from_json_text(cache.to_json_text()).entries(), cache.entries());
    EXPECT_EQ(oracle::OracleCache::load(dir / "absent.json").size(), 0u);
}

TEST(CorrectionRules, OrderIndependentAndPositiveOnly) {
    const std::vector<std::string> lines{"fscanf source >2", "sscanf source >2", "printf sink 1,2", "recv source 2"};
    std::mt19937 rng(2);
    oracle::CorrectionRules reference;
    for (const auto& l : lines) reference.load(l);
    const std::vector<FuncSpec> probes{source("fscanf", ParamSelector::index(2)), source("sscanf", ParamSelector::index(1)),
                                       sink("printf", ParamSelector::all_from(1)), source("recv", ParamSelector::index(1)),
                                       sink("fscanf", ParamSelector::index(1))};
    for (int round = 0; round < 20; ++round) {
        auto shuffled = lines;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::string text;
        for (const auto& l : shuffled) text += l + "\n";
        oracle::CorrectionRules rules;
        rules.load(text);
        for (const auto& p : probes) EXPECT_EQ(rules.apply(p), reference.apply(p));
    }
    EXPECT_EQ(reference.apply(source("fscanf", ParamSelector::index(2))).selector, ParamSelector::after(2));
    EXPECT_EQ(reference.apply(sink("fscanf", ParamSelector::index(1))).selector, ParamSelector::index(1));
    EXPECT_THROW(reference.load("fscanf origin 2"), std::invalid_argument);
}

}  // namespace taintchain::test
