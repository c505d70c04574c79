#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mita/error.hpp"
#include "mita/experiment.hpp"

using namespace mita;
using nlohmann::json;

namespace {

json small_config(const std::string& out_dir) {
    json j = json::parse(R"({
        "source": {"n_train_per_class": 60, "n_test_per_class": 30},
        "net": {"hidden_dims": [8]},
        "training": {"steps": 100},
        "scenarios": [
            {"name": "pure", "dist_a": {"kind": "rotate", "severity": 3}, "batch_size": 40, "num_batches": 2},
            {"name": "mix", "regime": "mixture", "preset": "category_distinct", "ratio": 0.1,
             "batch_size": 40, "num_batches": 2}
        ],
        "methods": ["source", "mita", {"name": "model_only", "config": {"model_ada": {"steps": 1}}}],
        "seeds": [1, 2, 3]
    })");
    j["output_dir"] = out_dir;
    return j;
}

std::string scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("mita_test_experiment_" + name);
    std::filesystem::remove_all(dir);
    return dir.string();
}

std::string config_error(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("config errors name the offending field") {
    json j = small_config("x");
    j["scenarios"][1]["dist_a"] = {{"kind", "rotate"}, {"severity", 2}, {"colour", 1}};
    CHECK(config_error(j).find("scenarios[1].dist_a.colour") != std::string::npos);

    j = small_config("x");
    j["scenarios"][0]["dist_a"]["kind"] = 4;
    CHECK(config_error(j).find("scenarios[0].dist_a.kind") != std::string::npos);

    j = small_config("x");
    j["scenarios"][0]["dist_a"]["kind"] = "fog";
    CHECK(config_error(j).find("scenarios[0].dist_a.kind") != std::string::npos);

    j = small_config("x");
    j["method_config"] = {{"model_ada", {{"chain", {{"stepsize", 1.0}}}}}};
    CHECK(config_error(j).find("method_config.model_ada.chain.stepsize") != std::string::npos);

    j = small_config("x");
    j["methods"][1] = "mitaa";
    CHECK(config_error(j).find("methods[1]") != std::string::npos);

    j = small_config("x");
    j["scenarios"][1]["name"] = "pure";
    CHECK_FALSE(config_error(j).empty());

    j = small_config("x");
    j["training"]["batch_size"] = 1;
    CHECK_FALSE(config_error(j).empty());

    CHECK_THROWS_AS(load_config(scratch("nofile") + "/none.json"), IoError);
}

TEST_CASE("the effective config reads back to an equal value") {
    const ExperimentConfig cfg = parse_config(small_config("out_rt"));
    CHECK(cfg.methods.size() == 3);
    CHECK(cfg.methods[2].config.mita.inference.steps == 1);
    CHECK(cfg.methods[1].config.mita.inference.steps == 3);
    CHECK(cfg.scenarios[1].dist_b.has_value());
    CHECK(parse_config(to_json(cfg)) == cfg);
    CHECK(to_json(parse_config(to_json(cfg))) == to_json(cfg));
    CHECK(checkpoint_path(cfg) == "out_rt/source.mitanet");
    CHECK(resolved_net_spec(cfg).num_classes == 4);
    CHECK(parse_config(json::object()).scenarios.empty());
}

TEST_CASE("source training is deterministic and zero steps keep the initialization") {
    ExperimentConfig cfg = parse_config(small_config("unused"));
    const SourceData data = gen_source(cfg.source);
    const NetSpec spec = resolved_net_spec(cfg);
    const TrainResult a = train_source(spec, data, cfg.training);
    const TrainResult b = train_source(spec, data, cfg.training);
    CHECK(a.net == b.net);
    CHECK(a.loss == b.loss);
    CHECK(a.loss.back() < a.loss.front());

    cfg.training.steps = 0;
    CHECK(train_source(spec, data, cfg.training).net == init_net(spec, cfg.training.seed));
}

TEST_CASE("a sweep yields one record per cell and reruns agree modulo timing") {
    const ExperimentConfig cfg = parse_config(small_config("unused"));
    const ParamNet net = train_source(resolved_net_spec(cfg), gen_source(cfg.source), cfg.training).net;
    const auto first = run_sweep(cfg, net);
    REQUIRE(first.size() == 2 * 3 * 3);
    CHECK(first[0].run_id == "source-pure-s1");
    CHECK(first[2].run_id == "source-pure-s3");
    CHECK(first[3].run_id == "mita-pure-s1");
    for (const RunRecord& r : first) {
        CHECK(r.config == to_json(cfg));
        if (r.method == "source") {
            CHECK(r.traces.is_null());
        } else {
            CHECK(r.traces.is_array());
        }
        if (r.scenario == "pure") {
            CHECK(r.n_b == 0);
            CHECK(r.errors.size() == 1);
        } else {
            CHECK(r.n_a == 2 * outlier_count(0.1, 40));
            CHECK(r.errors.size() == 2);
        }
    }
    const auto second = run_sweep(cfg, net);
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(record_payload(first[i]) == record_payload(second[i]));
    }
}

TEST_CASE("online mode carries the adapted net across batches") {
    const ExperimentConfig cfg = parse_config(small_config("unused"));
    const SourceData data = gen_source(cfg.source);
    const ParamNet net = train_source(resolved_net_spec(cfg), data, cfg.training).net;
    const MethodEntry entry{Method::model_only, cfg.method_config};
    const RunRecord episodic = run_cell(net, data.test, cfg.scenarios[0], entry, 1);
    const RunRecord online = run_cell(net, data.test, cfg.scenarios[0], entry, 1, {true, ""});
    CHECK(episodic.traces[0] == online.traces[0]);
    CHECK_FALSE(episodic.traces[1] == online.traces[1]);
    const RunRecord source = run_cell(net, data.test, cfg.scenarios[0], {Method::source, {}}, 1, {true, ""});
    CHECK(source.traces.is_null());
}

TEST_CASE("commands write checkpoints, records and reports") {
    const std::string out = scratch("commands");
    json j = small_config(out);
    j["seeds"] = {0};
    j["trace"] = true;
    const ExperimentConfig cfg = parse_config(j);

    CHECK_THROWS_AS(cmd_run(cfg), IoError);

    const auto paths = cmd_gen_data(cfg, out + "/data");
    CHECK(paths.size() == 4);
    for (const auto& p : paths) {
        CHECK(std::filesystem::exists(p));
    }

    const TrainResult trained = cmd_train_source(cfg);
    CHECK(load_net(checkpoint_path(cfg)) == trained.net);
    const std::string first_bytes = [&] {
        std::ifstream is(checkpoint_path(cfg), std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }();
    cmd_train_source(cfg);
    std::ifstream again(checkpoint_path(cfg), std::ios::binary);
    std::ostringstream again_bytes;
    again_bytes << again.rdbuf();
    CHECK(again_bytes.str() == first_bytes);

    const auto records = cmd_run(cfg);
    CHECK(records.size() == 6);
    CHECK(std::filesystem::exists(out + "/report.txt"));
    CHECK(std::filesystem::exists(out + "/report.csv"));
    CHECK(std::filesystem::exists(out + "/ablation.txt"));
    CHECK(std::filesystem::exists(out + "/records/mita-mix-s0.jsonl"));
    const RunRecord& mita = records[1];
    REQUIRE(mita.method == "mita");
    CHECK_FALSE(mita.trace_files.empty());
    for (const auto& f : mita.trace_files) {
        CHECK(std::filesystem::exists(f));
    }

    const auto reloaded = load_records_dir(out + "/records");
    CHECK(reloaded.size() == records.size());
    CHECK(cmd_report(out + "/records").text == report(reloaded).text);

    ExperimentConfig wider = cfg;
    wider.net.hidden_dims = {9};
    CHECK_THROWS_AS(cmd_run(wider), ConfigError);
}
