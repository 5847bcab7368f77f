#include "taintchain/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace taintchain::report {

Labels parse_labels(const json& j) {
    if (!j.is_array()) throw SchemaError("<labels>", "expected an array of {subject, cwe, vulnerable}");
    Labels out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string where = "[" + std::to_string(i) + "]";
        try {
            const auto subject = j[i].at("subject").get<std::string>();
            CorpusLabel l{j[i].at("cwe").get<std::string>(), j[i].at("vulnerable").get<bool>()};
            if (!out.emplace(subject, l).second) throw SchemaError(where, "duplicate subject '" + subject + "'");
        } catch (const json::exception& e) {
            throw SchemaError(where, e.what());
        }
    }
    return out;
}

Labels load_labels(const std::filesystem::path& path) { return parse_labels(read_json_file(path)); }

json labels_to_json(const Labels& labels) {
    json arr = json::array();
    for (const auto& [s, l] : labels) arr.push_back({{"subject", s}, {"cwe", l.expected_cwe}, {"vulnerable", l.vulnerable}});
    return arr;
}

MetricRow compute_row(const std::string& cwe, const Confusion& c, std::optional<double> avg_seconds) {
    MetricRow r{cwe, c, {}, {}, {}, {}, avg_seconds};
    const long total = c.tp + c.tn + c.fp + c.fn;
    if (total > 0) r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
    if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (r.precision && r.recall && *r.precision + *r.recall > 0) {
        r.f1 = 2 * *r.precision * *r.recall / (*r.precision + *r.recall);
    }
    return r;
}

bool detected(const std::vector<Verdict>& verdicts, const std::string& subject, const CorpusLabel& label) {
    return std::any_of(verdicts.begin(), verdicts.end(), [&](const Verdict& v) {
        return v.subject == subject && v.vulnerable == Vulnerability::yes &&
               std::find(v.cwe_tags.begin(), v.cwe_tags.end(), label.expected_cwe) != v.cwe_tags.end();
    });
}

MetricsTable score(const std::vector<Verdict>& verdicts, const Labels& labels, const std::vector<std::string>& subjects,
                   const std::map<std::string, double>& seconds_per_subject) {
    for (const auto& v : verdicts) {
        if (labels.count(v.subject) == 0) throw ScoringError("verdict for unlabeled subject '" + v.subject + "'");
    }
    std::vector<std::string> scope = subjects;
    if (scope.empty()) {
        for (const auto& [s, _] : labels) scope.push_back(s);
    }
    std::sort(scope.begin(), scope.end());
    scope.erase(std::unique(scope.begin(), scope.end()), scope.end());

    struct Acc {
        Confusion c;
        double seconds = 0;
        long timed = 0;
    };
    std::map<std::string, Acc> per_cwe;
    Acc all;
    for (const auto& s : scope) {
        auto it = labels.find(s);
        if (it == labels.end()) throw ScoringError("subject '" + s + "' has no label");
        const bool hit = detected(verdicts, s, it->second);
        for (Acc* acc : {&per_cwe[it->second.expected_cwe], &all}) {
            if (it->second.vulnerable) {
                (hit ? acc->c.tp : acc->c.fn)++;
            } else {
                (hit ? acc->c.fp : acc->c.tn)++;
            }
            if (auto t = seconds_per_subject.find(s); t != seconds_per_subject.end()) {
                acc->seconds += t->second;
                acc->timed++;
            }
        }
    }
    auto avg = [](const Acc& a) -> std::optional<double> {
        if (a.timed == 0) return std::nullopt;
        return a.seconds / static_cast<double>(a.timed);
    };
    MetricsTable t;
    for (const auto& [cwe, acc] : per_cwe) t.rows.push_back(compute_row(cwe, acc.c, avg(acc)));
    t.rows.push_back(compute_row("ALL", all.c, avg(all)));
    return t;
}

std::set<std::string> true_positives(const std::vector<Verdict>& verdicts, const Labels& labels) {
    std::set<std::string> out;
    for (const auto& [s, l] : labels) {
        if (l.vulnerable && detected(verdicts, s, l)) out.insert(s);
    }
    return out;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string pct(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100.0);
    return buf;
}

}  // namespace

json to_json(const MetricRow& r) {
    return {{"cwe", r.cwe},
            {"tp", r.counts.tp},
            {"fn", r.counts.fn},
            {"tn", r.counts.tn},
            {"fp", r.counts.fp},
            {"accuracy", opt(r.accuracy)},
            {"precision", opt(r.precision)},
            {"recall", opt(r.recall)},
            {"f1", opt(r.f1)},
            {"avg_seconds", opt(r.avg_seconds)}};
}

json to_json(const MetricsTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) rows.push_back(to_json(r));
    return rows;
}

std::string render_table(const MetricsTable& t) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %5s %5s %5s %5s %9s %10s %9s %9s %9s\n", "CWE", "TP", "FN", "TN", "FP",
                  "accuracy", "precision", "recall", "F1", "avg s");
    out << line;
    for (const auto& r : t.rows) {
        std::string secs = "n/a";
        if (r.avg_seconds) {
            char b[32];
            std::snprintf(b, sizeof b, "%.3f", *r.avg_seconds);
            secs = b;
        }
        std::snprintf(line, sizeof line, "%-10s %5ld %5ld %5ld %5ld %9s %10s %9s %9s %9s\n", r.cwe.c_str(),
                      r.counts.tp, r.counts.fn, r.counts.tn, r.counts.fp, pct(r.accuracy).c_str(),
                      pct(r.precision).c_str(), pct(r.recall).c_str(), pct(r.f1).c_str(), secs.c_str());
        out << line;
    }
    return out.str();
}

std::set<std::pair<std::string, std::string>> unique_bugs(const std::vector<DangerousFlow>& flows) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& df : flows) {
        const std::string vd = df.chain.vd.function_id + ":" + std::to_string(df.chain.vd.site_line);
        for (const auto& sc : df.source_calls) out.emplace(sc.function_id + ":" + std::to_string(sc.site_line), vd);
    }
    return out;
}

}  // namespace taintchain::report
