#include "mita/records.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "mita/error.hpp"

namespace mita {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
    const json& v = j.at(key);
    if (v.is_null()) {
        return std::nullopt;
    }
    return v.get<double>();
}

} // namespace

json to_json(const RunRecord& r) {
    json grid = json::object();
    for (const auto& [shift, row] : r.errors.entries()) {
        json cells = json::object();
        for (const auto& [severity, e] : row) {
            cells[std::to_string(severity)] = e;
        }
        grid[shift] = std::move(cells);
    }
    return json{{"run_id", r.run_id},
                {"method", r.method},
                {"scenario", r.scenario},
                {"scenario_fingerprint", r.scenario_fingerprint},
                {"regime", r.regime},
                {"seed", r.seed},
                {"acc_a", optional_number(r.acc_a)},
                {"acc_b", optional_number(r.acc_b)},
                {"acc_all", optional_number(r.acc_all)},
                {"n_a", r.n_a},
                {"n_b", r.n_b},
                {"errors", std::move(grid)},
                {"wall_time_s", r.wall_time_s},
                {"timestamp", r.timestamp},
                {"trace_files", r.trace_files},
                {"traces", r.traces},
                {"config", r.config}};
}

RunRecord record_from_json(const json& j) {
    try {
        RunRecord r;
        r.run_id = j.at("run_id").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.scenario = j.at("scenario").get<std::string>();
        r.scenario_fingerprint = j.at("scenario_fingerprint").get<std::string>();
        r.regime = j.at("regime").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.acc_a = read_optional(j, "acc_a");
        r.acc_b = read_optional(j, "acc_b");
        r.acc_all = read_optional(j, "acc_all");
        r.n_a = j.at("n_a").get<std::size_t>();
        r.n_b = j.at("n_b").get<std::size_t>();
        for (const auto& [shift, cells] : j.at("errors").items()) {
            for (const auto& [severity, e] : cells.items()) {
                r.errors.set(shift, std::stoi(severity), e.get<double>());
            }
        }
        r.wall_time_s = j.at("wall_time_s").get<double>();
        r.timestamp = j.at("timestamp").get<std::string>();
        r.trace_files = j.at("trace_files").get<std::vector<std::string>>();
        r.traces = j.at("traces");
        r.config = j.at("config");
        return r;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed run record: ") + e.what());
    } catch (const std::logic_error& e) {
        throw IoError(std::string("malformed run record: ") + e.what());
    } catch (const SpecError& e) {
        throw IoError(std::string("malformed run record: ") + e.what());
    }
}

json record_payload(const RunRecord& r) {
    json j = to_json(r);
    j.erase("wall_time_s");
    j.erase("timestamp");
    return j;
}

void append_record(const std::string& path, const RunRecord& r) {
    std::ofstream os(path, std::ios::app);
    if (!os) {
        throw IoError("cannot open record file " + path);
    }
    os << to_json(r).dump() << '\n';
    if (!os) {
        throw IoError("failed to write record file " + path);
    }
}

std::vector<RunRecord> load_records(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open record file " + path);
    }
    std::vector<RunRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            out.push_back(record_from_json(j));
        } catch (const IoError& e) {
            throw IoError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<RunRecord> load_records_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw IoError("record directory " + dir + " does not exist");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> out;
    for (const auto& f : files) {
        auto recs = load_records(f.string());
        out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
    }
    return out;
}

} // namespace mita
