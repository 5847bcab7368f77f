#pragma once

// Prompt sequences for dangerous flows and the conversation that turns one
// into a verdict.

#include "taintchain/llm_backend.hpp"
#include "taintchain/program_model.hpp"

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace taintchain::promptchat {

inline constexpr const char* kStartAnchor = "marked as the taint label";
inline constexpr const char* kMiddleAnchor = "Continue to analyze function";
inline constexpr const char* kEndAnchor = "according to CWE";

/// "first", "second", ... "tenth", then "11th", "12th", ...
std::string ordinal(int k);

/// Ordinal phrase for a source call's positions: "third", "third and
/// fourth"; position 0 renders as "return value".
std::string parameter_phrase(const std::vector<int>& positions);

std::string render_start(const std::string& function, const std::string& parameter, const std::string& code);
/// The parenthetical sentence is included iff `source` is set.
std::string render_middle(const std::string& code,
                          const std::optional<std::pair<std::string, std::string>>& source = std::nullopt);
std::string render_end();

class PromptError : public std::runtime_error {
public:
    PromptError(std::string function, const std::string& what)
        : std::runtime_error(what), function_(std::move(function)) {}
    const std::string& function() const { return function_; }

private:
    std::string function_;
};

/// Start prompt for the head function (anchored at its first source call),
/// one middle prompt per further chain element, then the end prompt.
PromptSequence build_prompt_sequence(const DangerousFlow& df, const ProgramExport& exp);

struct ConversationOptions {
    llm::RetryPolicy retry;
    /// Prompts longer than this are refused with an "oversize" note; 0
    /// disables the check.
    std::size_t max_prompt_chars = 0;
};

/// Sends the prompts in order within one conversation. Transport failures
/// are retried per the policy; exhausting them, or an oversize rejection,
/// yields an indeterminate verdict with a note.
Verdict run_conversation(const PromptSequence& ps, llm::LlmBackend& backend, const ConversationOptions& options = {},
                         const std::string& subject = {});

struct Extracted {
    Vulnerability vulnerable = Vulnerability::indeterminate;
    std::vector<std::string> cwe_tags;
    bool operator==(const Extracted&) const = default;
};

/// CWE-<digits> tokens mean yes (tags in order of first appearance);
/// otherwise a negation phrase means no; otherwise indeterminate.
Extracted extract_verdict(const std::string& final_reply);

}  // namespace taintchain::promptchat
