#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mita/baselines.hpp"
#include "mita/records.hpp"
#include "mita/scenarios.hpp"

namespace mita {

struct TrainingConfig {
    std::size_t steps = 1500;
    double rate = 0.05;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer{OptimizerConfig::Kind::momentum};

    bool operator==(const TrainingConfig&) const = default;
};

struct MethodEntry {
    Method method = Method::source;
    MethodConfig config;

    bool operator==(const MethodEntry&) const = default;
};

/// Everything a sweep needs. The net's input_dim and num_classes always come
/// from the source spec.
struct ExperimentConfig {
    SourceSpec source;
    NetSpec net{2, {32, 32}, 4, Activation::relu, true};
    TrainingConfig training;
    std::vector<ScenarioSpec> scenarios;
    /// Shared method settings; entries of `methods` may override them.
    MethodConfig method_config;
    std::vector<MethodEntry> methods;
    std::vector<std::uint64_t> seeds{0};
    std::string output_dir = "out";
    /// Empty means <output_dir>/source.mitanet.
    std::string checkpoint;
    bool online = false;
    bool trace = false;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates a config document. Unknown keys and type errors
/// throw ConfigError naming the field path, e.g. "scenarios[1].dist_a.kind".
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
/// Effective config with every default resolved; parse_config reads it back
/// to an equal value.
nlohmann::json to_json(const ExperimentConfig& cfg);

std::string checkpoint_path(const ExperimentConfig& cfg);

struct TrainResult {
    ParamNet net;
    double clean_accuracy = 0.0;
    std::vector<double> loss;
};

/// Mini-batch cross-entropy training with batch statistics in the norm
/// layers; afterwards the running statistics are set from the full training
/// set. With zero steps the initialization is returned untouched.
TrainResult train_source(const NetSpec& spec, const SourceData& data, const TrainingConfig& cfg);

/// The net spec with input_dim and num_classes taken from the source.
NetSpec resolved_net_spec(const ExperimentConfig& cfg);

/// Seed that drives the adaptation of batch `batch` in a run.
std::uint64_t batch_seed(std::uint64_t run_seed, const ScenarioSpec& scenario, std::size_t batch);

/// The scenario with its stream seed mixed with the run seed.
ScenarioSpec realize_scenario(const ScenarioSpec& scenario, std::uint64_t run_seed);

struct CellOptions {
    bool online = false;
    /// Directory for chain CSV dumps; empty disables them.
    std::string trace_dir;
};

/// One (method, scenario, seed) run over every batch of the scenario.
RunRecord run_cell(const ParamNet& source, const LabeledBatch& clean_test, const ScenarioSpec& scenario,
                   const MethodEntry& method, std::uint64_t seed, const CellOptions& options = {});

/// Every (scenario, method, seed) cell, in that nesting order. Each record
/// carries the effective config.
std::vector<RunRecord> run_sweep(const ExperimentConfig& cfg, const ParamNet& source);

/// Writes train/test datasets (binary and CSV) to `out_dir`. Returns the paths.
std::vector<std::string> cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_dir);
/// Trains, saves the checkpoint and a small JSON training report.
TrainResult cmd_train_source(const ExperimentConfig& cfg);
/// Loads the checkpoint (IoError when missing), runs the sweep and writes
/// records/<run_id>.jsonl, report.txt, report.csv and ablation.txt.
std::vector<RunRecord> cmd_run(const ExperimentConfig& cfg);
Report cmd_report(const std::string& records_dir);

} // namespace mita
