#include "taintchain/oracle.hpp"

#include "taintchain/json_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace taintchain::oracle {

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::positive: return "positive";
        case Outcome::negative: return "negative";
        case Outcome::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

std::string sink_prompt(const std::string& subject) {
    return "As a program analyst, is it possible to use a call " + subject +
           " as a sink when performing taint analysis? If so which parameters need to be checked for taint. Please "
           "answer yes or no without additional explanation. If yes, please indicate the corresponding parameters. "
           "For example, the system function can be used as a sink, and the first parameter needs to be checked as "
           "(system; 1).";
}

std::string source_prompt(const std::string& subject) {
    return "As a program analyst, is it possible to use a call to " + subject +
           " as a starting point (source) for taint analysis? If the function can be used as a taint source, which "
           "parameter in the call stores the external input data. Please answer yes or no without additional "
           "explanation. If yes, please indicate the corresponding parameters. For example, the recv function call "
           "can be used as a taint source, and the second parameter as a buffer stores the input data as (recv; 2).";
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

/// "1", "2, 3, ...", ">2", "0", "ret"; nullopt when any item is not a position.
std::optional<ParamSelector> parse_positions(const std::string& text) {
    std::optional<ParamSelector> sel;
    auto add = [&](const ParamSelector& s) { sel = sel ? sel->merged(s) : s; };
    bool open = false;
    int highest = 0;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (item == "..." || item == "…" || item == "etc" || item == "etc.") {
            open = true;
        } else if (item[0] == '>' && all_digits(trim(item.substr(1)))) {
            add(ParamSelector::after(std::stoi(trim(item.substr(1)))));
        } else if (all_digits(item)) {
            int k = std::stoi(item);
            if (k == 0) {
                add(ParamSelector::return_value());
            } else {
                add(ParamSelector::index(k));
                highest = std::max(highest, k);
            }
        } else if (lower(item) == "ret" || lower(item) == "return") {
            add(ParamSelector::return_value());
        } else {
            return std::nullopt;
        }
    }
    if (open) add(ParamSelector::all_from(std::max(highest, 1)));
    return sel;
}

}  // namespace

ParsedReply parse_spec_reply(const std::string& text) {
    static const std::regex pattern(R"(\(\s*([A-Za-z_][A-Za-z0-9_.@]*)\s*;\s*([^()]*?)\s*\))");
    ParsedReply out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), pattern); it != std::sregex_iterator(); ++it) {
        if (auto sel = parse_positions((*it)[2].str())) out.specs.emplace_back((*it)[1].str(), *sel);
    }
    static const std::regex head(R"(^\W*(yes|no)\b)", std::regex::icase);
    std::smatch m;
    const std::string t = trim(text);
    if (std::regex_search(t, m, head)) {
        if (lower(m[1].str()) == "no") {
            out.outcome = Outcome::negative;
            out.specs.clear();
        } else {
            out.outcome = out.specs.empty() ? Outcome::indeterminate : Outcome::positive;
        }
    } else {
        out.outcome = out.specs.empty() ? Outcome::indeterminate : Outcome::positive;
    }
    return out;
}

std::vector<FuncSpec> parse_spec_list(const std::string& text, Role role) {
    std::vector<FuncSpec> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        auto parsed = parse_spec_reply(line);
        if (parsed.specs.empty()) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected '(name; selector)'");
        }
        for (auto& [name, sel] : parsed.specs) out.push_back({name, role, sel});
    }
    return out;
}

std::vector<FuncSpec> load_spec_list(const std::filesystem::path& path, Role role) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_spec_list(ss.str(), role);
}

// ---------------------------------------------------------------------------

CorrectionRules CorrectionRules::seeded() {
    CorrectionRules r;
    r.add("fscanf", Role::source, ParamSelector::after(2));
    return r;
}

void CorrectionRules::add(const std::string& name, Role role, ParamSelector selector) {
    rules_[{name, role}] = std::move(selector);
}

void CorrectionRules::load(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string name;
        std::string role;
        std::string sel;
        if (!(ls >> name)) continue;
        if (!(ls >> role >> sel)) {
            throw std::invalid_argument("corrections line " + std::to_string(lineno) + ": expected 'name role selector'");
        }
        add(name, role_from_string(role), ParamSelector::parse(sel));
    }
}

void CorrectionRules::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corrections file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    load(ss.str());
}

FuncSpec CorrectionRules::apply(FuncSpec spec) const {
    auto it = rules_.find({spec.name, spec.role});
    if (it != rules_.end()) spec.selector = it->second;
    return spec;
}

// ---------------------------------------------------------------------------

OracleCache::OracleCache(const OracleCache& other) {
    std::lock_guard lock(other.mu_);
    entries_ = other.entries_;
}

OracleCache& OracleCache::operator=(const OracleCache& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mu_, other.mu_);
    entries_ = other.entries_;
    return *this;
}

std::optional<CacheEntry> OracleCache::get(const std::string& name, Role role) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find({name, role});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void OracleCache::put(CacheEntry e) {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(e.name, e.role);
    entries_[key] = std::move(e);
}

std::vector<CacheEntry> OracleCache::entries() const {
    std::lock_guard lock(mu_);
    std::vector<CacheEntry> out;
    for (const auto& [_, e] : entries_) out.push_back(e);
    return out;
}

std::size_t OracleCache::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::string OracleCache::to_json_text() const {
    json arr = json::array();
    for (const auto& e : entries()) {
        json j = {{"name", e.name},
                  {"role", taintchain::to_string(e.role)},
                  {"selector", e.outcome == Outcome::positive ? e.selector.to_string() : to_string(e.outcome)},
                  {"model", e.model},
                  {"timestamp", e.timestamp}};
        if (!e.raw.empty()) j["raw"] = e.raw;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

OracleCache OracleCache::from_json_text(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("<cache>", std::string("malformed JSON: ") + e.what());
    }
    if (!arr.is_array()) throw SchemaError("<cache>", "expected an array");
    OracleCache cache;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& j = arr[i];
        const std::string where = "[" + std::to_string(i) + "]";
        try {
            CacheEntry e;
            e.name = j.at("name").get<std::string>();
            e.role = role_from_string(j.at("role").get<std::string>());
            const auto sel = j.at("selector").get<std::string>();
            if (sel == "negative") {
                e.outcome = Outcome::negative;
            } else if (sel == "indeterminate") {
                e.outcome = Outcome::indeterminate;
            } else {
                e.outcome = Outcome::positive;
                e.selector = ParamSelector::parse(sel);
            }
            e.model = j.value("model", "");
            e.timestamp = j.value("timestamp", "");
            e.raw = j.value("raw", "");
            cache.put(std::move(e));
        } catch (const json::exception& ex) {
            throw SchemaError(where, ex.what());
        } catch (const std::invalid_argument& ex) {
            throw SchemaError(where, ex.what());
        }
    }
    return cache;
}

void OracleCache::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json_text()); }

OracleCache OracleCache::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    if (trim(ss.str()).empty()) return {};
    return from_json_text(ss.str());
}

// ---------------------------------------------------------------------------

Oracle::Oracle(OracleCache& cache, CorrectionRules rules, llm::LlmBackend* backend, llm::RetryPolicy retry)
    : cache_(cache), rules_(std::move(rules)), backend_(backend), retry_(retry) {}

std::size_t Oracle::backend_requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

ClassifyResult Oracle::classify(const std::string& name, Role role, const std::optional<std::string>& body) {
    if (auto hit = cache_.get(name, role)) {
        if (hit->outcome != Outcome::indeterminate || backend_ == nullptr) {
            ClassifyResult r{hit->outcome, std::nullopt, hit->raw, true};
            if (hit->outcome == Outcome::positive) r.spec = rules_.apply({name, role, hit->selector});
            return r;
        }
    } else if (backend_ == nullptr) {
        return {Outcome::indeterminate, std::nullopt, "no backend and no cache entry", false};
    }

    const auto key = std::make_pair(name, role);
    std::promise<ClassifyResult> promise;
    std::shared_future<ClassifyResult> fut;
    bool owner = false;
    {
        std::lock_guard lock(mu_);
        auto it = in_flight_.find(key);
        if (it != in_flight_.end()) {
            fut = it->second;
        } else {
            fut = promise.get_future().share();
            in_flight_.emplace(key, fut);
            owner = true;
        }
    }
    if (!owner) return fut.get();

    ClassifyResult r;
    try {
        r = query(name, role, body);
    } catch (...) {
        {
            std::lock_guard lock(mu_);
            in_flight_.erase(key);
        }
        promise.set_exception(std::current_exception());
        throw;
    }
    promise.set_value(r);
    std::lock_guard lock(mu_);
    in_flight_.erase(key);
    return r;
}

ClassifyResult Oracle::query(const std::string& name, Role role, const std::optional<std::string>& body) {
    const std::string subject = body.value_or(name);
    const std::vector<ChatMessage> messages{
        {"user", role == Role::sink ? sink_prompt(subject) : source_prompt(subject)}};
    const auto params = backend_->params();

    std::string reply;
    std::string failure;
    auto delay = retry_.backoff;
    for (int attempt = 0;; ++attempt) {
        {
            std::lock_guard lock(mu_);
            ++requests_;
        }
        try {
            reply = backend_->complete(messages);
            failure.clear();
            break;
        } catch (const llm::BackendError& e) {
            failure = e.what();
            if (e.kind() != llm::BackendError::Kind::transport || attempt >= retry_.max_retries) break;
        }
        std::this_thread::sleep_for(delay);
        delay = std::chrono::duration_cast<std::chrono::milliseconds>(delay * retry_.multiplier);
    }

    CacheEntry entry{name, role, Outcome::indeterminate, {}, params.model, params.timestamp, {}};
    ClassifyResult r;
    if (!failure.empty()) {
        entry.raw = "backend error: " + failure;
    } else {
        entry.raw = reply;
        auto parsed = parse_spec_reply(reply);
        entry.outcome = parsed.outcome;
        if (parsed.outcome == Outcome::positive) {
            ParamSelector sel;
            bool matched = false;
            for (const auto& [n, s] : parsed.specs) {
                if (n == name) {
                    sel = matched ? sel.merged(s) : s;
                    matched = true;
                }
            }
            if (!matched) {
                for (const auto& [n, s] : parsed.specs) sel = sel.empty() ? s : sel.merged(s);
            }
            entry.selector = rules_.apply({name, role, sel}).selector;
            r.spec = FuncSpec{name, role, entry.selector};
        }
    }
    r.outcome = entry.outcome;
    r.raw = entry.raw;
    cache_.put(std::move(entry));
    return r;
}

Identified Oracle::identify(const ProgramExport& exp) {
    Identified out;
    std::set<std::string> seen;
    for (const auto& imp : exp.imports) {
        if (!seen.insert(imp.name).second) continue;
        std::optional<std::string> body;
        if (imp.kind == Linkage::static_linked && imp.body) body = imp.body;
        for (Role role : {Role::sink, Role::source}) {
            auto r = classify(imp.name, role, body);
            if (r.outcome == Outcome::positive && r.spec) {
                (role == Role::sink ? out.sinks : out.sources).push_back(*r.spec);
            } else if (r.outcome == Outcome::indeterminate) {
                out.diagnostics.push_back({Severity::warning, "oracle/" + imp.name,
                                           taintchain::to_string(role) + " classification indeterminate; excluded: " +
                                               r.raw});
            }
        }
    }
    return out;
}

}  // namespace taintchain::oracle
