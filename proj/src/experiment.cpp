#include "mita/experiment.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mita/error.hpp"
#include "mita/random.hpp"

namespace mita {

using nlohmann::json;
namespace fs = std::filesystem;

std::string checkpoint_path(const ExperimentConfig& cfg) {
    if (!cfg.checkpoint.empty()) {
        return cfg.checkpoint;
    }
    return (fs::path(cfg.output_dir) / "source.mitanet").string();
}

NetSpec resolved_net_spec(const ExperimentConfig& cfg) {
    NetSpec spec = cfg.net;
    spec.input_dim = cfg.source.dim;
    spec.num_classes = cfg.source.num_classes;
    return spec;
}

namespace {

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

double clean_accuracy(const ParamNet& net, const LabeledBatch& data) {
    if (data.size() == 0) {
        return 0.0;
    }
    const BatchPrediction pred = predict(EnergyModel(net), data.x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        correct += pred.labels[i] == data.labels[i] ? 1 : 0;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json model_ada_trace(const ModelAdaResult& r) {
    return {{"cd_loss", r.cd_loss},
            {"positive_energy", r.positive_energy},
            {"negative_energy", r.negative_energy},
            {"final_rate", r.final_rate}};
}

json batch_trace(Method method, const MethodOutput& out) {
    if (method == Method::tent_entropy) {
        return {{"entropy", out.entropy_trace}};
    }
    if (!out.outcome) {
        return nullptr;
    }
    const AdaptOutcome& o = *out.outcome;
    json t = {{"inference", model_ada_trace(o.inference)}};
    if (method != Method::model_only) {
        t["generator"] = model_ada_trace(o.generator);
        t["data_energy"] = o.data.energy;
    }
    return t;
}

std::vector<std::string> dump_chains(const std::string& dir, const std::string& run_id, std::size_t batch,
                                     const AdaptOutcome& o, bool with_generator) {
    std::vector<std::string> paths;
    fs::create_directories(dir);
    auto dump = [&](const std::vector<ChainTrace>& chains, const std::string& role) {
        for (std::size_t i = 0; i < chains.size(); ++i) {
            ChainState state;
            state.energy_trace = chains[i].energy;
            state.grad_norm_trace = chains[i].grad_norm;
            state.step_index = chains[i].energy.empty() ? 0 : chains[i].energy.size() - 1;
            const fs::path p = fs::path(dir) / (run_id + "-b" + std::to_string(batch) + "-" + role + "-step" +
                                                std::to_string(i) + ".csv");
            std::ofstream os(p);
            if (!os) {
                throw IoError("cannot write " + p.string());
            }
            write_chain_trace_csv(os, state);
            paths.push_back(p.string());
        }
    };
    dump(o.inference.chains, "inference");
    if (with_generator) {
        dump(o.generator.chains, "generator");
        ChainState data;
        data.energy_trace = o.data.energy;
        data.grad_norm_trace = o.data.grad_norm;
        data.step_index = o.data.energy.empty() ? 0 : o.data.energy.size() - 1;
        const fs::path p = fs::path(dir) / (run_id + "-b" + std::to_string(batch) + "-data.csv");
        std::ofstream os(p);
        if (!os) {
            throw IoError("cannot write " + p.string());
        }
        write_chain_trace_csv(os, data);
        paths.push_back(p.string());
    }
    return paths;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) {
        throw IoError("cannot write " + p.string());
    }
    os << text;
}

} // namespace

TrainResult train_source(const NetSpec& spec, const SourceData& data, const TrainingConfig& cfg) {
    spec.validate();
    data.train.validate();
    if (cfg.batch_size < 2) {
        throw SpecError("training batch size must be at least 2");
    }
    ParamNet net = init_net(spec, cfg.seed);
    TrainResult result{net, 0.0, {}};
    if (cfg.steps == 0) {
        result.clean_accuracy = clean_accuracy(net, data.test);
        return result;
    }
    const std::size_t n = data.train.size();
    if (n < 2) {
        throw SpecError("training set needs at least two samples");
    }
    const NormMode mode = spec.use_norm_layers ? NormMode::train_batch_stats : NormMode::eval_running_stats;
    const std::size_t bs = std::min(cfg.batch_size, n);
    Rng rng(derive_seed(cfg.seed, 1));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = n;
    Optimizer opt(cfg.optimizer);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (cursor + bs > n) {
            shuffle(order, rng);
            cursor = 0;
        }
        const std::span<const std::size_t> rows(order.data() + cursor, bs);
        cursor += bs;
        std::vector<int> labels(bs);
        for (std::size_t i = 0; i < bs; ++i) {
            labels[i] = data.train.labels[rows[i]];
        }
        const LossGradient g =
            grad_params(net, gather_rows(data.train.x, rows), LossHead::cross_entropy(labels), mode);
        if (!std::isfinite(g.loss) || !g.grad.allFinite()) {
            throw DivergenceError("source training diverged at step " + std::to_string(step));
        }
        result.loss.push_back(g.loss);
        net = opt.step(net, g.grad, cfg.rate, ParamMask::all);
    }
    if (spec.use_norm_layers) {
        net = recompute_norm_stats(net, data.train.x);
    }
    result.net = net;
    result.clean_accuracy = clean_accuracy(net, data.test);
    return result;
}

std::uint64_t batch_seed(std::uint64_t run_seed, const ScenarioSpec& scenario, std::size_t batch) {
    return derive_seed(derive_seed(run_seed, scenario.seed), batch);
}

ScenarioSpec realize_scenario(const ScenarioSpec& scenario, std::uint64_t run_seed) {
    ScenarioSpec s = scenario;
    s.seed = derive_seed(scenario.seed, run_seed);
    return s;
}

RunRecord run_cell(const ParamNet& source, const LabeledBatch& clean_test, const ScenarioSpec& scenario,
                   const MethodEntry& method, std::uint64_t seed, const CellOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.method = to_string(method.method);
    rec.scenario = scenario.name;
    rec.scenario_fingerprint = scenario.fingerprint();
    rec.regime = to_string(scenario.regime);
    rec.seed = seed;
    rec.run_id = rec.method + "-" + scenario.name + "-s" + std::to_string(seed);

    const std::vector<LabeledBatch> batches = compose_batches(realize_scenario(scenario, seed), clean_test);
    std::vector<int> preds;
    std::vector<int> labels;
    std::vector<std::uint8_t> tags;
    json traces = json::array();
    bool any_trace = false;
    ParamNet current = source;
    const bool keep = !options.trace_dir.empty();
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const LabeledBatch& batch = batches[b];
        MethodOutput out =
            adapt_and_predict(method.method, current, batch.x, batch_seed(seed, scenario, b), method.config, keep);
        preds.insert(preds.end(), out.prediction.labels.begin(), out.prediction.labels.end());
        labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
        tags.insert(tags.end(), batch.tags.begin(), batch.tags.end());
        json t = batch_trace(method.method, out);
        any_trace = any_trace || !t.is_null();
        traces.push_back(std::move(t));
        if (keep && out.outcome) {
            const bool with_generator = method.method != Method::model_only;
            auto paths = dump_chains(options.trace_dir, rec.run_id, b, *out.outcome, with_generator);
            rec.trace_files.insert(rec.trace_files.end(), paths.begin(), paths.end());
        }
        if (options.online) {
            current = std::move(out.adapted_net);
        }
    }
    const GroupAccuracy acc = accuracy(preds, labels, tags);
    rec.acc_a = acc.a;
    rec.acc_b = acc.b;
    rec.acc_all = acc.all;
    rec.n_a = acc.n_a;
    rec.n_b = acc.n_b;
    if (scenario.dist_b && scenario.dist_b->name() == scenario.dist_a.name()) {
        rec.errors.set(to_string(scenario.dist_a.kind), scenario.dist_a.severity, 1.0 - *acc.all / 100.0);
    } else {
        if (acc.a) {
            rec.errors.set(to_string(scenario.dist_a.kind), scenario.dist_a.severity, 1.0 - *acc.a / 100.0);
        }
        if (scenario.dist_b && acc.b) {
            rec.errors.set(to_string(scenario.dist_b->kind), scenario.dist_b->severity, 1.0 - *acc.b / 100.0);
        }
    }
    rec.traces = any_trace ? std::move(traces) : json(nullptr);
    rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.timestamp = utc_timestamp();
    return rec;
}

std::vector<RunRecord> run_sweep(const ExperimentConfig& cfg, const ParamNet& source) {
    const SourceData data = gen_source(cfg.source);
    const json effective = to_json(cfg);
    CellOptions options;
    options.online = cfg.online;
    if (cfg.trace) {
        options.trace_dir = (fs::path(cfg.output_dir) / "traces").string();
    }
    std::vector<RunRecord> records;
    for (const auto& scenario : cfg.scenarios) {
        for (const auto& method : cfg.methods) {
            for (const std::uint64_t seed : cfg.seeds) {
                RunRecord rec = run_cell(source, data.test, scenario, method, seed, options);
                rec.config = effective;
                records.push_back(std::move(rec));
            }
        }
    }
    return records;
}

std::vector<std::string> cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
    const SourceData data = gen_source(cfg.source);
    fs::create_directories(out_dir);
    std::vector<std::string> paths;
    for (const auto& [name, set] : {std::pair<std::string, const LabeledBatch*>{"train", &data.train},
                                    std::pair<std::string, const LabeledBatch*>{"test", &data.test}}) {
        const fs::path bin = fs::path(out_dir) / (name + ".mitadat");
        save_dataset(bin.string(), *set);
        const fs::path csv = fs::path(out_dir) / (name + ".csv");
        std::ofstream os(csv);
        if (!os) {
            throw IoError("cannot write " + csv.string());
        }
        write_dataset_csv(os, *set);
        paths.push_back(bin.string());
        paths.push_back(csv.string());
    }
    return paths;
}

TrainResult cmd_train_source(const ExperimentConfig& cfg) {
    const SourceData data = gen_source(cfg.source);
    TrainResult result = train_source(resolved_net_spec(cfg), data, cfg.training);
    const fs::path ckpt = checkpoint_path(cfg);
    if (ckpt.has_parent_path()) {
        fs::create_directories(ckpt.parent_path());
    }
    save_net(ckpt.string(), result.net);
    const json report = {{"checkpoint", ckpt.string()},
                         {"clean_accuracy", result.clean_accuracy},
                         {"final_loss", result.loss.empty() ? json(nullptr) : json(result.loss.back())},
                         {"steps", cfg.training.steps}};
    fs::create_directories(cfg.output_dir);
    write_text(fs::path(cfg.output_dir) / "train_report.json", report.dump(2) + "\n");
    return result;
}

std::vector<RunRecord> cmd_run(const ExperimentConfig& cfg) {
    const std::string ckpt = checkpoint_path(cfg);
    if (!fs::exists(ckpt)) {
        throw IoError("checkpoint not found: " + ckpt + " (run train-source first)");
    }
    const ParamNet source = load_net(ckpt);
    if (source.spec() != resolved_net_spec(cfg)) {
        throw ConfigError("checkpoint " + ckpt + " does not match the configured net");
    }
    const std::vector<RunRecord> records = run_sweep(cfg, source);
    const fs::path dir = fs::path(cfg.output_dir) / "records";
    fs::create_directories(dir);
    for (const auto& r : records) {
        const fs::path p = dir / (r.run_id + ".jsonl");
        fs::remove(p);
    }
    for (const auto& r : records) {
        append_record((dir / (r.run_id + ".jsonl")).string(), r);
    }
    const Report rep = cmd_report(dir.string());
    write_text(fs::path(cfg.output_dir) / "report.txt", rep.text);
    write_text(fs::path(cfg.output_dir) / "report.csv", rep.csv);
    write_text(fs::path(cfg.output_dir) / "ablation.txt", report_ablation(load_records_dir(dir.string())).text);
    return records;
}

Report cmd_report(const std::string& records_dir) {
    if (!fs::is_directory(records_dir)) {
        throw IoError("records directory not found: " + records_dir);
    }
    return report(load_records_dir(records_dir));
}

} // namespace mita
