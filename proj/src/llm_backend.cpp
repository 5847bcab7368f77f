#include "taintchain/llm_backend.hpp"

#include "taintchain/json_io.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <regex>
#include <thread>

namespace taintchain::llm {

void check_temperature(double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        throw std::invalid_argument("temperature must be within [0, 1], got " + std::to_string(t));
    }
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// Mock script

namespace {

BackendError::Kind error_kind(const std::string& s) {
    if (s == "transport") return BackendError::Kind::transport;
    if (s == "oversize") return BackendError::Kind::oversize;
    throw SchemaError("replies[].error", "expected 'transport' or 'oversize', got '" + s + "'");
}

}  // namespace

MockScript parse_mock_script(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError("<mock script>", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("<mock script>", "expected an object");
    MockScript s;
    if (j.contains("replies")) {
        for (const auto& r : j.at("replies")) {
            MockReply reply;
            if (r.is_string()) {
                reply.content = r.get<std::string>();
            } else if (r.contains("error")) {
                reply.error = error_kind(r.at("error").get<std::string>());
            } else {
                reply.content = r.at("content").get<std::string>();
            }
            s.replies.push_back(std::move(reply));
        }
    }
    if (j.contains("rules")) {
        for (const auto& r : j.at("rules")) {
            MockRule rule;
            rule.when_last_contains = r.value("when_last_contains", "");
            rule.when_all_contains = r.value("when_all_contains", std::vector<std::string>{});
            rule.reply = r.at("reply").get<std::string>();
            s.rules.push_back(std::move(rule));
        }
    }
    s.fallback = j.value("fallback", s.fallback);
    s.default_rules = j.value("default_rules", s.default_rules);
    s.model = j.value("model", s.model);
    return s;
}

MockScript load_mock_script(const std::filesystem::path& path) {
    return parse_mock_script(read_json_file(path).dump());
}

MockScript script_from_transcript(const Transcript& t) {
    MockScript s;
    for (const auto& m : t.messages) {
        if (m.role == "assistant") s.replies.push_back({m.content, std::nullopt});
    }
    if (!t.params.model.empty()) s.model = t.params.model;
    s.default_rules = false;
    return s;
}

// ---------------------------------------------------------------------------
// Mock backend

MockBackend::MockBackend(MockScript script, double temperature)
    : script_(std::move(script)), temperature_(temperature) {
    check_temperature(temperature);
}

ModelParams MockBackend::params() const { return {script_.model, temperature_, "1970-01-01T00:00:00Z"}; }

std::size_t MockBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

namespace {

bool rule_matches(const MockRule& rule, const std::vector<ChatMessage>& messages) {
    std::string last;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "user") {
            last = it->content;
            break;
        }
    }
    if (!rule.when_last_contains.empty() && last.find(rule.when_last_contains) == std::string::npos) return false;
    for (const auto& needle : rule.when_all_contains) {
        bool seen = std::any_of(messages.begin(), messages.end(), [&](const ChatMessage& m) {
            return m.role == "user" && m.content.find(needle) != std::string::npos;
        });
        if (!seen) return false;
    }
    return true;
}

std::string between(const std::string& text, const std::string& open, const std::string& close) {
    auto a = text.find(open);
    if (a == std::string::npos) return {};
    a += open.size();
    auto b = text.find(close, a);
    if (b == std::string::npos) return {};
    return text.substr(a, b - a);
}

struct KnownSpec {
    const char* name;
    const char* reply;
};

constexpr KnownSpec kKnownSinks[] = {
    {"system", "Yes. (system; 1)"},
    {"popen", "Yes. (popen; 1)"},
    {"execl", "Yes. (execl; 1, 2, ...)"},
    {"execlp", "Yes. (execlp; 1, 2, ...)"},
    {"execv", "Yes. (execv; 1, 2)"},
    {"execvp", "Yes. (execvp; 1, 2)"},
    {"printf",
     "Yes, printf can be used as a sink. The parameters to be checked for taint are: Format string (printf; 1) Any "
     "additional parameters being formatted (printf; 2, 3, ...)"},
    {"fprintf", "Yes. (fprintf; 2, 3, ...)"},
    {"syslog", "Yes. (syslog; 2, 3, ...)"},
    {"sprintf", "Yes. (sprintf; 2, 3, ...)"},
    {"strcpy", "Yes. (strcpy; 2)"},
    {"strcat", "Yes. (strcat; 2)"},
    {"memcpy", "Yes. (memcpy; 2, 3)"},
};

constexpr KnownSpec kKnownSources[] = {
    {"recv", "Yes. (recv; 2)"},
    {"recvfrom", "Yes. (recvfrom; 2)"},
    {"read", "Yes. (read; 2)"},
    {"fgets", "Yes. (fgets; 1)"},
    {"gets", "Yes. (gets; 1)"},
    {"fscanf", "(fscanf; 2)"},
    {"scanf", "Yes. (scanf; 2, 3, ...)"},
    {"getenv", "Yes. (getenv; 0)"},
};

struct CweGuess {
    const char* callee;
    const char* reply;
};

constexpr CweGuess kCweGuesses[] = {
    {"system", "Yes. Tainted data reaches a shell command, an OS command injection vulnerability (CWE-78)."},
    {"popen", "Yes. Tainted data reaches a shell command, an OS command injection vulnerability (CWE-78)."},
    {"execl", "Yes. Tainted data selects the executed command, an OS command injection vulnerability (CWE-78)."},
    {"strcpy", "Yes. Tainted data is copied without a bounds check, a classic buffer overflow (CWE-120)."},
    {"strcat", "Yes. Tainted data is appended without a bounds check, a classic buffer overflow (CWE-120)."},
    {"memcpy", "Yes. A tainted length controls a copy, a classic buffer overflow (CWE-120)."},
    {"sprintf", "Yes. Tainted data is formatted into a fixed buffer, a classic buffer overflow (CWE-120)."},
    {"printf", "Yes. Tainted data is used as a format string, an uncontrolled format string (CWE-134)."},
    {"fprintf", "Yes. Tainted data is used as a format string, an uncontrolled format string (CWE-134)."},
    {"syslog", "Yes. Tainted data is used as a format string, an uncontrolled format string (CWE-134)."},
};

bool mentions_call(const std::string& text, const std::string& callee) {
    const std::regex re("\\b" + callee + "\\s*\\(");
    return std::regex_search(text, re);
}

}  // namespace

std::optional<std::string> MockBackend::builtin_reply(const std::vector<ChatMessage>& messages) {
    if (messages.empty()) return std::nullopt;
    const std::string& last = messages.back().content;
    if (last.find("as a sink when performing taint analysis") != std::string::npos) {
        const auto name = between(last, "use a call ", " as a sink");
        for (const auto& k : kKnownSinks) {
            if (name == k.name) return std::string(k.reply);
        }
        return std::string("No.");
    }
    if (last.find("as a starting point (source)") != std::string::npos) {
        const auto name = between(last, "use a call to ", " as a starting point");
        for (const auto& k : kKnownSources) {
            if (name == k.name) return std::string(k.reply);
        }
        return std::string("No.");
    }
    if (last.find("according to CWE") != std::string::npos) {
        std::string code;
        for (const auto& m : messages) {
            if (m.role == "user") code += m.content + "\n";
        }
        for (const auto& g : kCweGuesses) {
            if (mentions_call(code, g.callee)) return std::string(g.reply);
        }
        return std::string("The code does not contain a vulnerability reachable from the taint source.");
    }
    if (last.find("marked as the taint label") != std::string::npos ||
        last.find("Continue to analyze function") != std::string::npos) {
        return std::string("Data flow noted.");
    }
    return std::nullopt;
}

std::string MockBackend::complete(const std::vector<ChatMessage>& messages) {
    std::optional<MockReply> queued;
    {
        std::lock_guard lock(mu_);
        ++calls_;
        if (!script_.replies.empty()) {
            queued = std::move(script_.replies.front());
            script_.replies.pop_front();
        }
    }
    if (queued) {
        if (queued->error) {
            throw BackendError(*queued->error, *queued->error == BackendError::Kind::oversize
                                                   ? "scripted oversize rejection"
                                                   : "scripted transport failure");
        }
        return queued->content.value_or("");
    }
    for (const auto& rule : script_.rules) {
        if (rule_matches(rule, messages)) return rule.reply;
    }
    if (script_.default_rules) {
        if (auto r = builtin_reply(messages)) return *r;
    }
    return script_.fallback;
}

// ---------------------------------------------------------------------------
// HTTP backend

RateLimiter::RateLimiter(double requests_per_minute) {
    if (requests_per_minute > 0) {
        interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(60.0 / requests_per_minute));
    }
}

void RateLimiter::acquire() {
    if (interval_ == std::chrono::steady_clock::duration::zero()) return;
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mu_);
        auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

HttpBackend::HttpBackend(HttpConfig config)
    : config_(std::move(config)), limiter_(std::make_shared<RateLimiter>(config_.requests_per_minute)) {
    check_temperature(config_.temperature);
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

ModelParams HttpBackend::params() const { return {config_.model, config_.temperature, utc_timestamp()}; }

std::string HttpBackend::complete(const std::vector<ChatMessage>& messages) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(config_.base_url, m, url_re)) {
        throw BackendError(BackendError::Kind::transport, "invalid base URL '" + config_.base_url + "'");
    }
    std::string prefix = m[2].str();
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

    json body = {{"model", config_.model}, {"temperature", config_.temperature}, {"messages", messages}};

    limiter_->acquire();
    httplib::Client cli(m[1].str());
    cli.set_connection_timeout(config_.timeout_seconds, 0);
    cli.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = cli.Post(prefix + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
        throw BackendError(BackendError::Kind::transport, "request failed: " + httplib::to_string(res.error()));
    }
    if (res->status == 413 ||
        (res->status != 200 && res->body.find("context_length_exceeded") != std::string::npos)) {
        throw BackendError(BackendError::Kind::oversize, "context length exceeded (HTTP " +
                                                             std::to_string(res->status) + ")");
    }
    if (res->status != 200) {
        throw BackendError(BackendError::Kind::transport, "HTTP " + std::to_string(res->status));
    }
    try {
        auto j = json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(BackendError::Kind::transport, std::string("malformed response: ") + e.what());
    }
}

}  // namespace taintchain::llm
