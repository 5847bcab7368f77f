#pragma once

// Chat backends. A backend answers one conversation turn given the whole
// message history; conversations themselves are driven by promptchat.

#include "taintchain/program_model.hpp"

#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace taintchain::llm {

inline constexpr double kDefaultTemperature = 0.5;

class BackendError : public std::runtime_error {
public:
    enum class Kind { transport, oversize };
    BackendError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Throws std::invalid_argument unless 0 <= t <= 1.
void check_temperature(double t);

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    /// Reply to the last message of `messages`. Throws BackendError.
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
    /// Model id, temperature and the timestamp to record for a conversation.
    virtual ModelParams params() const = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds backoff{500};
    double multiplier = 2.0;
};

// ---------------------------------------------------------------------------
// Mock

struct MockReply {
    std::optional<std::string> content;
    std::optional<BackendError::Kind> error;
};

struct MockRule {
    std::string when_last_contains;               // substring of the last user message
    std::vector<std::string> when_all_contains;   // each a substring of some user message
    std::string reply;
};

/// Scripted behaviour: queued replies are consumed first, then the first
/// matching rule answers, then the built-in rules (when enabled), then the
/// fallback.
struct MockScript {
    std::deque<MockReply> replies;
    std::vector<MockRule> rules;
    std::string fallback = "No vulnerability found.";
    bool default_rules = true;
    std::string model = "mock";
};

/// {"replies":[{"content":...}|{"error":"transport"|"oversize"}], "rules":[{"when_last_contains":...,
///  "when_all_contains":[...], "reply":...}], "fallback":..., "default_rules":bool, "model":...}
MockScript load_mock_script(const std::filesystem::path& path);
MockScript parse_mock_script(const std::string& json_text);
/// Replays the assistant turns of a recorded transcript in order.
MockScript script_from_transcript(const Transcript& t);

/// Deterministic reentrant backend. Its timestamp is fixed so that runs are
/// byte-identical.
class MockBackend : public LlmBackend {
public:
    explicit MockBackend(MockScript script = {}, double temperature = kDefaultTemperature);
    std::string complete(const std::vector<ChatMessage>& messages) override;
    ModelParams params() const override;
    std::size_t calls() const;

    /// Reply of the built-in rules, if any applies: oracle questions about
    /// well-known library functions and a final-turn CWE guess keyed on the
    /// sinks visible in the code.
    static std::optional<std::string> builtin_reply(const std::vector<ChatMessage>& messages);

private:
    MockScript script_;
    double temperature_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP

/// Spaces requests at least 60/requests_per_minute seconds apart across all
/// threads sharing it. Zero disables throttling.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute = 0);
    void acquire();

private:
    std::chrono::steady_clock::duration interval_{};
    std::chrono::steady_clock::time_point next_{};
    std::mutex mu_;
};

struct HttpConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4";
    double temperature = kDefaultTemperature;
    std::string api_key_env = "TAINTCHAIN_API_KEY";
    int timeout_seconds = 120;
    double requests_per_minute = 0;
};

/// POSTs {model, temperature, messages} to <base_url>/chat/completions and
/// returns choices[0].message.content. HTTP 413 and context-length errors
/// map to oversize; other failures to transport.
class HttpBackend : public LlmBackend {
public:
    explicit HttpBackend(HttpConfig config);
    std::string complete(const std::vector<ChatMessage>& messages) override;
    ModelParams params() const override;

private:
    HttpConfig config_;
    std::string api_key_;
    std::shared_ptr<RateLimiter> limiter_;
};

std::string utc_timestamp();

}  // namespace taintchain::llm
