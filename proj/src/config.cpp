#include <fstream>
#include <set>

#include "mita/error.hpp"
#include "mita/experiment.hpp"

namespace mita {

using nlohmann::json;

namespace {

/// Reads the members of one JSON object and rejects keys nobody asked for.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(where() + ": expected an object");
        }
    }

    Fields(const Fields&) = delete;
    Fields& operator=(const Fields&) = delete;

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <class T>
    void read(const std::string& key, T& out) {
        if (const json* v = find(key)) {
            out = convert<T>(*v, child(key));
        }
    }

    template <class T>
    void read_optional(const std::string& key, std::optional<T>& out) {
        if (const json* v = find(key)) {
            if (v->is_null()) {
                out.reset();
            } else {
                out = convert<T>(*v, child(key));
            }
        }
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (seen_.count(key) == 0) {
                throw ConfigError(child(key) + ": unknown key");
            }
        }
    }

    template <class T>
    static T convert(const json& v, const std::string& path) {
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(path + ": expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.is_number_integer() && v.get<long long>() < 0 &&
                                                !v.is_number_unsigned())) {
                    throw ConfigError(path + ": expected a non-negative integer");
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(path + ": expected a string");
            }
            return v.get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
auto wrap_spec(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const SpecError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::optional<Box> parse_box(const json& v, const std::string& path) {
    if (v.is_null()) {
        return std::nullopt;
    }
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw ConfigError(path + ": expected [lo, hi] or null");
    }
    return Box{v[0].get<double>(), v[1].get<double>()};
}

json box_json(const std::optional<Box>& b) { return b ? json::array({b->lo, b->hi}) : json(nullptr); }

void parse_optimizer(const json& j, const std::string& path, OptimizerConfig& out) {
    Fields f(j, path);
    if (const json* v = f.find("kind")) {
        const auto s = Fields::convert<std::string>(*v, f.child("kind"));
        out.kind = wrap_spec(f.child("kind"), [&] { return optimizer_from_string(s); });
    }
    f.read("momentum", out.momentum);
    f.read("beta1", out.beta1);
    f.read("beta2", out.beta2);
    f.read("epsilon", out.epsilon);
    f.finish();
}

json optimizer_json(const OptimizerConfig& o) {
    return {{"kind", to_string(o.kind)}, {"momentum", o.momentum}, {"beta1", o.beta1}, {"beta2", o.beta2},
            {"epsilon", o.epsilon}};
}

template <class E, class Parse>
void read_enum(Fields& f, const std::string& key, E& out, Parse parse) {
    if (const json* v = f.find(key)) {
        const auto s = Fields::convert<std::string>(*v, f.child(key));
        out = wrap_spec(f.child(key), [&] { return parse(s); });
    }
}

void parse_chain(const json& j, const std::string& path, ChainConfig& out) {
    Fields f(j, path);
    f.read("step_size", out.step_size);
    f.read("steps", out.steps);
    read_enum(f, "noise", out.noise, noise_scale_from_string);
    read_enum(f, "init", out.init, chain_init_from_string);
    if (const json* v = f.find("clamp_box")) out.clamp_box = parse_box(*v, f.child("clamp_box"));
    f.read_optional("grad_clip", out.grad_clip);
    if (const json* v = f.find("p0_box")) {
        const auto b = parse_box(*v, f.child("p0_box"));
        if (!b) throw ConfigError(f.child("p0_box") + ": must not be null");
        out.p0_box = *b;
    }
    f.finish();
}

json chain_json(const ChainConfig& c) {
    return {{"step_size", c.step_size},
            {"steps", c.steps},
            {"noise", to_string(c.noise)},
            {"init", to_string(c.init)},
            {"clamp_box", box_json(c.clamp_box)},
            {"grad_clip", c.grad_clip ? json(*c.grad_clip) : json(nullptr)},
            {"p0_box", box_json(c.p0_box)}};
}

void parse_model_ada(const json& j, const std::string& path, ModelAdaConfig& out) {
    Fields f(j, path);
    f.read("rate", out.rate);
    f.read("steps", out.steps);
    read_enum(f, "mask", out.mask, param_mask_from_string);
    f.read("num_negatives", out.num_negatives);
    read_enum(f, "norm_mode", out.norm_mode, norm_mode_from_string);
    if (const json* v = f.find("optimizer")) parse_optimizer(*v, f.child("optimizer"), out.optimizer);
    if (const json* v = f.find("chain")) parse_chain(*v, f.child("chain"), out.chain);
    f.finish();
    wrap_spec(path, [&] { out.validate(); return 0; });
}

json model_ada_json(const ModelAdaConfig& m) {
    return {{"rate", m.rate},
            {"steps", m.steps},
            {"mask", to_string(m.mask)},
            {"num_negatives", m.num_negatives},
            {"norm_mode", to_string(m.norm_mode)},
            {"optimizer", optimizer_json(m.optimizer)},
            {"chain", chain_json(m.chain)}};
}

void parse_data_ada(const json& j, const std::string& path, DataAdaConfig& out) {
    Fields f(j, path);
    f.read("step_size", out.step_size);
    f.read("steps", out.steps);
    if (const json* v = f.find("clamp_box")) out.clamp_box = parse_box(*v, f.child("clamp_box"));
    read_enum(f, "norm_mode", out.norm_mode, norm_mode_from_string);
    f.finish();
    wrap_spec(path, [&] { out.validate(); return 0; });
}

json data_ada_json(const DataAdaConfig& d) {
    return {{"step_size", d.step_size},
            {"steps", d.steps},
            {"clamp_box", box_json(d.clamp_box)},
            {"norm_mode", to_string(d.norm_mode)}};
}

void parse_tent(const json& j, const std::string& path, TentConfig& out) {
    Fields f(j, path);
    f.read("steps", out.steps);
    f.read("rate", out.rate);
    f.read("recompute_norm_stats", out.recompute_norm_stats);
    if (const json* v = f.find("optimizer")) parse_optimizer(*v, f.child("optimizer"), out.optimizer);
    f.finish();
}

json tent_json(const TentConfig& t) {
    return {{"steps", t.steps},
            {"rate", t.rate},
            {"recompute_norm_stats", t.recompute_norm_stats},
            {"optimizer", optimizer_json(t.optimizer)}};
}

void parse_method_config(const json& j, const std::string& path, MethodConfig& out) {
    Fields f(j, path);
    if (const json* v = f.find("model_ada")) parse_model_ada(*v, f.child("model_ada"), out.mita.inference);
    if (const json* v = f.find("generator")) parse_model_ada(*v, f.child("generator"), out.mita.generator);
    if (const json* v = f.find("data_ada")) parse_data_ada(*v, f.child("data_ada"), out.mita.data);
    f.read("share_model", out.mita.share_model);
    if (const json* v = f.find("tent")) parse_tent(*v, f.child("tent"), out.tent);
    f.finish();
    wrap_spec(path, [&] { out.mita.validate(); return 0; });
}

json method_config_json(const MethodConfig& m) {
    return {{"model_ada", model_ada_json(m.mita.inference)},
            {"generator", model_ada_json(m.mita.generator)},
            {"data_ada", data_ada_json(m.mita.data)},
            {"share_model", m.mita.share_model},
            {"tent", tent_json(m.tent)}};
}

ShiftSpec parse_shift(const json& j, const std::string& path) {
    Fields f(j, path);
    ShiftSpec s;
    read_enum(f, "kind", s.kind, shift_kind_from_string);
    f.read("severity", s.severity);
    f.finish();
    wrap_spec(path, [&] { s.validate(); return 0; });
    return s;
}

json shift_json(const ShiftSpec& s) { return {{"kind", to_string(s.kind)}, {"severity", s.severity}}; }

ScenarioSpec parse_scenario(const json& j, const std::string& path, std::size_t index) {
    Fields f(j, path);
    ScenarioSpec s;
    s.name = "scenario" + std::to_string(index);
    f.read("name", s.name);
    read_enum(f, "regime", s.regime, regime_from_string);
    if (const json* v = f.find("preset")) {
        const auto name = Fields::convert<std::string>(*v, f.child("preset"));
        const auto pair = wrap_spec(f.child("preset"), [&] { return shift_pair_preset(name); });
        s.dist_a = pair.first;
        if (s.regime == Regime::mixture) {
            s.dist_b = pair.second;
        }
    }
    if (const json* v = f.find("dist_a")) s.dist_a = parse_shift(*v, f.child("dist_a"));
    if (const json* v = f.find("dist_b")) {
        if (v->is_null()) {
            s.dist_b.reset();
        } else {
            s.dist_b = parse_shift(*v, f.child("dist_b"));
        }
    }
    f.read("ratio", s.ratio);
    f.read("batch_size", s.batch_size);
    f.read("num_batches", s.num_batches);
    f.read("seed", s.seed);
    f.finish();
    wrap_spec(path, [&] { s.validate(); return 0; });
    return s;
}

json scenario_json(const ScenarioSpec& s) {
    return {{"name", s.name},
            {"regime", to_string(s.regime)},
            {"dist_a", shift_json(s.dist_a)},
            {"dist_b", s.dist_b ? shift_json(*s.dist_b) : json(nullptr)},
            {"ratio", s.ratio},
            {"batch_size", s.batch_size},
            {"num_batches", s.num_batches},
            {"seed", s.seed}};
}

void parse_source(const json& j, const std::string& path, SourceSpec& s) {
    Fields f(j, path);
    f.read("num_classes", s.num_classes);
    f.read("dim", s.dim);
    read_enum(f, "generator", s.generator, source_generator_from_string);
    if (const json* v = f.find("means")) {
        const auto rows = Fields::convert<std::vector<std::vector<double>>>(*v, f.child("means"));
        s.means.clear();
        for (const auto& r : rows) {
            s.means.push_back(Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size())));
        }
    }
    if (const json* v = f.find("covariances")) {
        const auto mats = Fields::convert<std::vector<std::vector<std::vector<double>>>>(*v, f.child("covariances"));
        s.covariances.clear();
        for (const auto& m : mats) {
            Matrix c(static_cast<Eigen::Index>(m.size()), m.empty() ? 0 : static_cast<Eigen::Index>(m[0].size()));
            for (std::size_t r = 0; r < m.size(); ++r) {
                if (m[r].size() != static_cast<std::size_t>(c.cols())) {
                    throw ConfigError(f.child("covariances") + ": ragged matrix");
                }
                for (std::size_t k = 0; k < m[r].size(); ++k) {
                    c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = m[r][k];
                }
            }
            s.covariances.push_back(std::move(c));
        }
    }
    f.read("radius", s.radius);
    f.read("stddev", s.stddev);
    f.read("spread_means", s.spread_means);
    f.read("n_train_per_class", s.n_train_per_class);
    f.read("n_test_per_class", s.n_test_per_class);
    f.read("seed", s.seed);
    f.finish();
    wrap_spec(path, [&] { s.validate(); return 0; });
}

json source_json(const SourceSpec& s) {
    json means = json::array();
    for (const Vector& m : s.means) {
        means.push_back(std::vector<double>(m.data(), m.data() + m.size()));
    }
    json covs = json::array();
    for (const Matrix& c : s.covariances) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < c.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index k = 0; k < c.cols(); ++k) {
                row.push_back(c(r, k));
            }
            rows.push_back(std::move(row));
        }
        covs.push_back(std::move(rows));
    }
    return {{"num_classes", s.num_classes},
            {"dim", s.dim},
            {"generator", to_string(s.generator)},
            {"means", std::move(means)},
            {"covariances", std::move(covs)},
            {"radius", s.radius},
            {"stddev", s.stddev},
            {"spread_means", s.spread_means},
            {"n_train_per_class", s.n_train_per_class},
            {"n_test_per_class", s.n_test_per_class},
            {"seed", s.seed}};
}

void parse_net(const json& j, const std::string& path, NetSpec& n) {
    Fields f(j, path);
    f.read("hidden_dims", n.hidden_dims);
    read_enum(f, "activation", n.activation, activation_from_string);
    f.read("use_norm_layers", n.use_norm_layers);
    f.finish();
}

void parse_training(const json& j, const std::string& path, TrainingConfig& t) {
    Fields f(j, path);
    f.read("steps", t.steps);
    f.read("rate", t.rate);
    f.read("batch_size", t.batch_size);
    f.read("seed", t.seed);
    if (const json* v = f.find("optimizer")) parse_optimizer(*v, f.child("optimizer"), t.optimizer);
    f.finish();
    if (t.batch_size < 2) {
        throw ConfigError(f.child("batch_size") + ": must be at least 2");
    }
}

} // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    Fields f(j, "");
    if (const json* v = f.find("source")) parse_source(*v, "source", cfg.source);
    if (const json* v = f.find("net")) parse_net(*v, "net", cfg.net);
    if (const json* v = f.find("training")) parse_training(*v, "training", cfg.training);
    if (const json* v = f.find("method_config")) parse_method_config(*v, "method_config", cfg.method_config);
    if (const json* v = f.find("scenarios")) {
        if (!v->is_array()) throw ConfigError("scenarios: expected an array");
        for (std::size_t i = 0; i < v->size(); ++i) {
            cfg.scenarios.push_back(parse_scenario((*v)[i], "scenarios[" + std::to_string(i) + "]", i));
        }
    }
    if (const json* v = f.find("methods")) {
        if (!v->is_array()) throw ConfigError("methods: expected an array");
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string path = "methods[" + std::to_string(i) + "]";
            const json& m = (*v)[i];
            MethodEntry entry{Method::source, cfg.method_config};
            if (m.is_string()) {
                entry.method = wrap_spec(path, [&] { return method_from_string(m.get<std::string>()); });
            } else {
                Fields mf(m, path);
                const json* name = mf.find("name");
                if (!name) throw ConfigError(path + ".name: required");
                const auto s = Fields::convert<std::string>(*name, mf.child("name"));
                entry.method = wrap_spec(mf.child("name"), [&] { return method_from_string(s); });
                if (const json* c = mf.find("config")) {
                    json merged = method_config_json(cfg.method_config);
                    merged.merge_patch(*c);
                    entry.config = MethodConfig{};
                    parse_method_config(merged, mf.child("config"), entry.config);
                }
                mf.finish();
            }
            cfg.methods.push_back(std::move(entry));
        }
    }
    f.read("seeds", cfg.seeds);
    f.read("output_dir", cfg.output_dir);
    f.read("checkpoint", cfg.checkpoint);
    f.read("online", cfg.online);
    f.read("trace", cfg.trace);
    f.finish();

    std::set<std::string> names;
    for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
        if (!names.insert(cfg.scenarios[i].name).second) {
            throw ConfigError("scenarios[" + std::to_string(i) + "].name: duplicate scenario name");
        }
    }
    wrap_spec("net", [&] { resolved_net_spec(cfg).validate(); return 0; });
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config file " + path);
    }
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
    json scenarios = json::array();
    for (const auto& s : cfg.scenarios) {
        scenarios.push_back(scenario_json(s));
    }
    json methods = json::array();
    for (const auto& m : cfg.methods) {
        if (m.config == cfg.method_config) {
            methods.push_back(to_string(m.method));
        } else {
            methods.push_back({{"name", to_string(m.method)}, {"config", method_config_json(m.config)}});
        }
    }
    return {{"source", source_json(cfg.source)},
            {"net",
             {{"hidden_dims", cfg.net.hidden_dims},
              {"activation", to_string(cfg.net.activation)},
              {"use_norm_layers", cfg.net.use_norm_layers}}},
            {"training",
             {{"steps", cfg.training.steps},
              {"rate", cfg.training.rate},
              {"batch_size", cfg.training.batch_size},
              {"seed", cfg.training.seed},
              {"optimizer", optimizer_json(cfg.training.optimizer)}}},
            {"method_config", method_config_json(cfg.method_config)},
            {"scenarios", std::move(scenarios)},
            {"methods", std::move(methods)},
            {"seeds", cfg.seeds},
            {"output_dir", cfg.output_dir},
            {"checkpoint", cfg.checkpoint},
            {"online", cfg.online},
            {"trace", cfg.trace}};
}

} // namespace mita
