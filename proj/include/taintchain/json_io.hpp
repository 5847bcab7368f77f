#pragma once

// JSON encodings for the export schema and every intermediate artifact.
// Field names here are the documented on-disk names.

#include "taintchain/program_model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace taintchain {

using json = nlohmann::json;

/// Schema violation while decoding; field() names the offending JSON path.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct DecodedExport {
    ProgramExport program;
    std::vector<Diagnostic> diagnostics;  // unknown-field warnings
};

DecodedExport decode_export(const json& j);
json encode_export(const ProgramExport& exp);

void to_json(json& j, const Diagnostic& d);
void from_json(const json& j, Diagnostic& d);
void to_json(json& j, const FuncSpec& s);
void from_json(const json& j, FuncSpec& s);
void to_json(json& j, const VulnerableDestination& vd);
void from_json(const json& j, VulnerableDestination& vd);
void to_json(json& j, const ArgBinding& b);
void from_json(const json& j, ArgBinding& b);
void to_json(json& j, const ChainStep& s);
void from_json(const json& j, ChainStep& s);
void to_json(json& j, const CallChain& c);
void from_json(const json& j, CallChain& c);
void to_json(json& j, const SourceCall& s);
void from_json(const json& j, SourceCall& s);
void to_json(json& j, const DangerousFlow& df);
void from_json(const json& j, DangerousFlow& df);
void to_json(json& j, const Prompt& p);
void from_json(const json& j, Prompt& p);
void to_json(json& j, const PromptSequence& ps);
void from_json(const json& j, PromptSequence& ps);
void to_json(json& j, const ChatMessage& m);
void from_json(const json& j, ChatMessage& m);
void to_json(json& j, const Transcript& t);
void from_json(const json& j, Transcript& t);
void to_json(json& j, const Verdict& v);
void from_json(const json& j, Verdict& v);

json read_json_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace taintchain
