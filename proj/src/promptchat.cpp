#include "taintchain/promptchat.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <thread>

namespace taintchain::promptchat {

std::string ordinal(int k) {
    static const char* const kWords[] = {"first", "second", "third", "fourth", "fifth",
                                         "sixth", "seventh", "eighth", "ninth", "tenth"};
    if (k >= 1 && k <= 10) return kWords[k - 1];
    const int mod100 = k % 100;
    const char* suffix = "th";
    if (mod100 < 11 || mod100 > 13) {
        if (k % 10 == 1) suffix = "st";
        if (k % 10 == 2) suffix = "nd";
        if (k % 10 == 3) suffix = "rd";
    }
    return std::to_string(k) + suffix;
}

std::string parameter_phrase(const std::vector<int>& positions) {
    std::vector<std::string> words;
    for (int p : positions) words.push_back(p == 0 ? "return value" : ordinal(p));
    if (words.empty()) return "first";
    std::string out = words[0];
    for (std::size_t i = 1; i < words.size(); ++i) out += (i + 1 == words.size() ? " and " : ", ") + words[i];
    return out;
}

std::string render_start(const std::string& function, const std::string& parameter, const std::string& code) {
    return "As a program analyst, I give you snippets of C code generated by decompilation, using " + function +
           " as the taint source, and the " + parameter +
           " parameter marked as the taint label to extract the taint data flow. Pay attention to the data alias and "
           "tainted data operations. Output in the form of data flows.\n\n" +
           code;
}

std::string render_middle(const std::string& code, const std::optional<std::pair<std::string, std::string>>& source) {
    std::string text =
        "Continue to analyze function according to the above taint analysis results. Pay attention to the data alias "
        "and tainted data operations.";
    if (source) {
        text += " (Note the new taint source " + source->first + " and the " + source->second +
                " parameter marked as the taint label.)";
    }
    return text + "\n\n" + code;
}

std::string render_end() {
    return "Based on the above taint analysis results, analyze whether the code has vulnerabilities. If there is a "
           "vulnerability, please explain what kind of vulnerability according to CWE.";
}

namespace {

const SourceCall* first_source_in(const DangerousFlow& df, const std::string& fid) {
    const SourceCall* best = nullptr;
    for (const auto& sc : df.source_calls) {
        if (sc.function_id != fid) continue;
        if (best == nullptr || sc.site_line < best->site_line) best = &sc;
    }
    return best;
}

}  // namespace

PromptSequence build_prompt_sequence(const DangerousFlow& df, const ProgramExport& exp) {
    const auto& funcs = df.chain.funcs;
    if (funcs.empty()) throw PromptError("", "dangerous flow '" + df.id + "' has an empty chain");
    PromptSequence ps;
    ps.df_id = df.id;
    for (std::size_t i = 0; i < funcs.size(); ++i) {
        const FunctionRecord* f = exp.find_function(funcs[i]);
        if (f == nullptr || f->body.find_first_not_of(" \t\r\n") == std::string::npos) {
            throw PromptError(funcs[i], "function '" + funcs[i] + "' has no body");
        }
        const SourceCall* sc = first_source_in(df, funcs[i]);
        if (i == 0) {
            if (sc == nullptr) throw PromptError(funcs[i], "head function '" + funcs[i] + "' hosts no source call");
            ps.prompts.push_back(
                {PromptKind::start, render_start(sc->spec.name, parameter_phrase(sc->positions), f->body)});
        } else if (sc != nullptr) {
            ps.prompts.push_back(
                {PromptKind::middle, render_middle(f->body, std::make_pair(sc->spec.name, parameter_phrase(sc->positions)))});
        } else {
            ps.prompts.push_back({PromptKind::middle, render_middle(f->body)});
        }
    }
    ps.prompts.push_back({PromptKind::end, render_end()});
    return ps;
}

Verdict run_conversation(const PromptSequence& ps, llm::LlmBackend& backend, const ConversationOptions& options,
                         const std::string& subject) {
    Verdict v;
    v.df_id = ps.df_id;
    v.subject = subject;
    v.transcript.params = backend.params();

    std::string last_reply;
    for (const auto& prompt : ps.prompts) {
        if (options.max_prompt_chars > 0 && prompt.text.size() > options.max_prompt_chars) {
            v.transcript.note = "oversize: " + to_string(prompt.kind) + " prompt has " +
                                std::to_string(prompt.text.size()) + " characters";
            return v;
        }
        v.transcript.messages.push_back({"user", prompt.text});
        auto delay = options.retry.backoff;
        for (int attempt = 0;; ++attempt) {
            try {
                last_reply = backend.complete(v.transcript.messages);
                break;
            } catch (const llm::BackendError& e) {
                if (e.kind() == llm::BackendError::Kind::oversize) {
                    v.transcript.note = std::string("oversize: ") + e.what();
                    return v;
                }
                if (attempt >= options.retry.max_retries) {
                    v.transcript.note = std::string("transport: ") + e.what();
                    return v;
                }
                ++v.transcript.retries;
            }
            std::this_thread::sleep_for(delay);
            delay = std::chrono::duration_cast<std::chrono::milliseconds>(delay * options.retry.multiplier);
        }
        v.transcript.messages.push_back({"assistant", last_reply});
    }
    auto ex = extract_verdict(last_reply);
    v.vulnerable = ex.vulnerable;
    v.cwe_tags = std::move(ex.cwe_tags);
    return v;
}

Extracted extract_verdict(const std::string& final_reply) {
    static const std::regex cwe(R"(\bCWE[-\s]?(\d+)\b)", std::regex::icase);
    Extracted out;
    for (auto it = std::sregex_iterator(final_reply.begin(), final_reply.end(), cwe); it != std::sregex_iterator();
         ++it) {
        std::string tag = "CWE-" + std::to_string(std::stoul((*it)[1].str()));
        if (std::find(out.cwe_tags.begin(), out.cwe_tags.end(), tag) == out.cwe_tags.end()) out.cwe_tags.push_back(tag);
    }
    if (!out.cwe_tags.empty()) {
        out.vulnerable = Vulnerability::yes;
        return out;
    }
    std::string lowered = final_reply;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return std::tolower(c); });
    static const char* const kNegations[] = {
        "no vulnerabilit",      "not vulnerable",       "does not contain",  "doesn't contain",
        "does not have",        "doesn't have",         "does not inherently", "no security issue",
        "is safe",              "does not introduce",   "not exploitable",   "no evidence of a vulnerab",
        "there is no vulnerab", "no known vulnerab",
    };
    for (const char* n : kNegations) {
        if (lowered.find(n) != std::string::npos) {
            out.vulnerable = Vulnerability::no;
            return out;
        }
    }
    return out;
}

}  // namespace taintchain::promptchat
