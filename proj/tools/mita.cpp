// Command-line front end: gen-data, train-source, run, report.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "mita/error.hpp"
#include "mita/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct Overrides {
    std::string config;
    std::string method;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool online = false;
    bool trace = false;
};

mita::ExperimentConfig resolve(const Overrides& o) {
    mita::ExperimentConfig cfg = o.config.empty() ? mita::parse_config(nlohmann::json::object())
                                                  : mita::load_config(o.config);
    if (!o.method.empty()) {
        mita::Method m;
        try {
            m = mita::method_from_string(o.method);
        } catch (const mita::SpecError& e) {
            throw mita::ConfigError(std::string("--method: ") + e.what());
        }
        cfg.methods = {mita::MethodEntry{m, cfg.method_config}};
    }
    if (o.seed) {
        cfg.seeds = {*o.seed};
    }
    if (!o.out.empty()) {
        cfg.output_dir = o.out;
    }
    cfg.online = cfg.online || o.online;
    cfg.trace = cfg.trace || o.trace;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-based test-time adaptation experiments"};
    app.require_subcommand(1);
    Overrides o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON experiment config");
        sub->add_option("--out", o.out, "output directory");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "write the source train/test sets");
    add_common(gen);

    CLI::App* train = app.add_subcommand("train-source", "train the source classifier and save a checkpoint");
    add_common(train);

    CLI::App* run = app.add_subcommand("run", "run the method x scenario x seed sweep");
    add_common(run);
    run->add_option("--method", o.method, "run only this method");
    run->add_option("--seed", o.seed, "run only this seed");
    run->add_flag("--online", o.online, "carry the adapted net across batches");
    run->add_flag("--trace", o.trace, "dump chain traces as CSV");

    std::string records_dir;
    CLI::App* rep = app.add_subcommand("report", "print tables from record files");
    rep->add_option("records_dir", records_dir, "directory of *.jsonl records")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (rep->parsed()) {
            std::cout << mita::cmd_report(records_dir).text;
            return kExitOk;
        }
        const mita::ExperimentConfig cfg = resolve(o);
        if (gen->parsed()) {
            for (const auto& p : mita::cmd_gen_data(cfg, cfg.output_dir)) {
                std::cout << p << '\n';
            }
        } else if (train->parsed()) {
            const mita::TrainResult r = mita::cmd_train_source(cfg);
            std::printf("checkpoint %s\nclean accuracy %.2f\n", mita::checkpoint_path(cfg).c_str(), r.clean_accuracy);
        } else if (run->parsed()) {
            const auto records = mita::cmd_run(cfg);
            std::cout << mita::report(records).text;
            std::cout << "== ablation ==\n" << mita::report_ablation(records).text;
        }
        return kExitOk;
    } catch (const mita::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const mita::SpecError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const mita::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const mita::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
