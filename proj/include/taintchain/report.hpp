#pragma once

// Corpus labels and detection metrics.

#include "taintchain/json_io.hpp"
#include "taintchain/program_model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace taintchain::report {

struct CorpusLabel {
    std::string expected_cwe;  // e.g. "CWE-78"
    bool vulnerable = true;
    bool operator==(const CorpusLabel&) const = default;
};

using Labels = std::map<std::string, CorpusLabel>;

/// JSON array of {subject, cwe, vulnerable}; duplicate subjects are an error.
Labels parse_labels(const json& j);
Labels load_labels(const std::filesystem::path& path);
json labels_to_json(const Labels& labels);

class ScoringError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Confusion {
    long tp = 0;
    long fn = 0;
    long tn = 0;
    long fp = 0;
    bool operator==(const Confusion&) const = default;
};

/// Rates are empty when their denominator is zero.
struct MetricRow {
    std::string cwe;
    Confusion counts;
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> avg_seconds;
};

MetricRow compute_row(const std::string& cwe, const Confusion& c, std::optional<double> avg_seconds = std::nullopt);

struct MetricsTable {
    std::vector<MetricRow> rows;  // one per expected CWE, sorted, then "ALL"
};

/// True when the verdicts flag `subject` with its expected CWE.
bool detected(const std::vector<Verdict>& verdicts, const std::string& subject, const CorpusLabel& label);

/// Scores every subject in `subjects` (all labeled subjects when empty).
/// A labeled-vulnerable subject is TP iff some verdict says yes with the
/// expected CWE; a labeled-benign subject is FP under the same condition.
/// Indeterminate verdicts count as no. Throws ScoringError for verdicts or
/// subjects without a label.
MetricsTable score(const std::vector<Verdict>& verdicts, const Labels& labels,
                   const std::vector<std::string>& subjects = {},
                   const std::map<std::string, double>& seconds_per_subject = {});

/// Labeled-vulnerable subjects counted as TP.
std::set<std::string> true_positives(const std::vector<Verdict>& verdicts, const Labels& labels);

json to_json(const MetricRow& row);
json to_json(const MetricsTable& table);
/// Plain-text table with percentages to two decimals; "n/a" when undefined.
std::string render_table(const MetricsTable& table);

/// Distinct (source site, VD site) pairs, each site as "function:line".
std::set<std::pair<std::string, std::string>> unique_bugs(const std::vector<DangerousFlow>& flows);

}  // namespace taintchain::report
