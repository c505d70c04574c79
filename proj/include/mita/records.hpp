#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mita/metrics.hpp"

namespace mita {

/// Result of one (method, scenario, seed) run.
struct RunRecord {
    std::string run_id;
    std::string method;
    std::string scenario;
    std::string scenario_fingerprint;
    std::string regime;
    std::uint64_t seed = 0;
    std::optional<double> acc_a;
    std::optional<double> acc_b;
    std::optional<double> acc_all;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    ErrorGrid errors;
    double wall_time_s = 0.0;
    std::string timestamp;
    std::vector<std::string> trace_files;
    nlohmann::json traces;  ///< adaptation traces, null when the method has none
    nlohmann::json config;  ///< effective experiment config

    bool operator==(const RunRecord&) const = default;
};

nlohmann::json to_json(const RunRecord& r);
/// Throws IoError on a missing or mistyped field.
RunRecord record_from_json(const nlohmann::json& j);

/// The record without its timing fields (wall_time_s, timestamp).
nlohmann::json record_payload(const RunRecord& r);

/// Appends one JSON line.
void append_record(const std::string& path, const RunRecord& r);
/// Reads every line of a JSON-lines file. Throws IoError naming the line on
/// malformed input.
std::vector<RunRecord> load_records(const std::string& path);
/// Every *.jsonl file in a directory, in file-name order.
std::vector<RunRecord> load_records_dir(const std::string& dir);

/// Fixed method order used by every report; unknown names sort after it.
int method_rank(const std::string& method);

struct Report {
    std::string text;
    std::string csv;
};

/// Per scenario: A / B / All accuracy averaged over seeds, one row per method.
Report report_groups(const std::vector<RunRecord>& records);
/// Per shift accuracy over pure-regime records, with Avg and mCE against
/// source records of the same scenarios.
Report report_shifts(const std::vector<RunRecord>& records);
/// Both tables.
Report report(const std::vector<RunRecord>& records);
/// report_groups restricted to source, model_only, mita_wo_m, mita_same, mita.
Report report_ablation(const std::vector<RunRecord>& records);

} // namespace mita
