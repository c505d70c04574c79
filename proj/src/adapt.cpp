#include "mita/adapt.hpp"

#include <cmath>

#include "mita/error.hpp"

namespace mita {

namespace {

bool finite(const ContrastiveGradient& g) { return std::isfinite(g.loss) && g.grad.allFinite(); }

} // namespace

void ModelAdaConfig::validate() const {
    chain.validate();
    if (chain.noise != NoiseScale::sqrt_alpha) {
        throw SpecError("model adaptation needs a noisy chain");
    }
    if (chain.init != ChainInit::from_noise_p0) {
        throw SpecError("model adaptation chains start from p0");
    }
    if (!(rate >= 0.0) || !std::isfinite(rate)) {
        throw SpecError("model adaptation rate must be finite and non-negative");
    }
}

void DataAdaConfig::validate() const { chain().validate(); }

ChainConfig DataAdaConfig::chain() const {
    ChainConfig c;
    c.step_size = step_size;
    c.steps = steps;
    c.noise = NoiseScale::zero;
    c.init = ChainInit::from_given_x;
    c.clamp_box = clamp_box;
    c.grad_clip = std::nullopt;
    return c;
}

MitaConfig::MitaConfig() { generator.steps = 15; }

void MitaConfig::validate() const {
    inference.validate();
    generator.validate();
    data.validate();
    if (generator.steps < inference.steps) {
        throw SpecError("the generator model must adapt for at least as many steps as the inference model");
    }
}

ModelAdaResult model_ada(const ParamNet& net, const Matrix& x_test, const ModelAdaConfig& cfg, std::uint64_t seed,
                         bool keep_chain_traces) {
    cfg.validate();
    if (x_test.rows() == 0) {
        throw DimensionError("model adaptation on an empty batch");
    }
    const std::size_t negatives =
        cfg.num_negatives > 0 ? cfg.num_negatives : static_cast<std::size_t>(x_test.rows());
    const auto dim = static_cast<std::size_t>(x_test.cols());

    ModelAdaResult out{net, {}, {}, {}, cfg.rate, {}};
    Optimizer optimizer(cfg.optimizer);
    int failures = 0;

    std::size_t i = 0;
    while (i < cfg.steps) {
        const std::uint64_t step_seed = derive_seed(derive_seed(seed, i), static_cast<std::uint64_t>(failures));
        std::optional<ContrastiveGradient> g;
        std::optional<ParamNet> next;
        Optimizer trial = optimizer;
        ChainState chain;
        try {
            chain = run_chain(EnergyModel(out.net, cfg.norm_mode), cfg.chain, step_seed, std::nullopt, dim, negatives);
            g = contrastive_gradient(NetEnergy{out.net, cfg.norm_mode}, x_test, chain.x);
            if (finite(*g)) {
                next = trial.step(out.net, g->grad, out.final_rate, cfg.mask);
            }
        } catch (const ChainError&) {
        } catch (const NumericError&) {
        }
        if (!next || !next->params().allFinite()) {
            if (++failures >= 2) {
                throw DivergenceError("model adaptation diverged at step " + std::to_string(i) +
                                      " after halving the rate to " + std::to_string(out.final_rate));
            }
            out.final_rate *= 0.5;
            continue;
        }
        optimizer = std::move(trial);
        out.net = std::move(*next);
        out.cd_loss.push_back(g->loss);
        out.positive_energy.push_back(g->positive_energy);
        out.negative_energy.push_back(g->negative_energy);
        if (keep_chain_traces) {
            out.chains.push_back({std::move(chain.energy_trace), std::move(chain.grad_norm_trace)});
        }
        ++i;
    }
    if (cfg.norm_mode == NormMode::train_batch_stats && cfg.steps > 0 && net.spec().use_norm_layers) {
        out.net = recompute_norm_stats(out.net, x_test);
    }
    return out;
}

DataAdaResult data_ada(const EnergySurface& surface, const Matrix& x_test, const DataAdaConfig& cfg) {
    cfg.validate();
    if (x_test.rows() == 0) {
        throw DimensionError("data adaptation on an empty batch");
    }
    ChainState s = run_chain(surface, cfg.chain(), 0, x_test);
    return {std::move(s.x), std::move(s.energy_trace), std::move(s.grad_norm_trace)};
}

DataAdaResult data_ada(const ParamNet& net, const Matrix& x_test, const DataAdaConfig& cfg) {
    return data_ada(EnergyModel(net, cfg.norm_mode), x_test, cfg);
}

MitaResult run_mita(const ParamNet& net, const Matrix& x_test, const MitaConfig& cfg, std::uint64_t seed,
                    bool keep_chain_traces) {
    cfg.validate();
    ModelAdaResult inference = model_ada(net, x_test, cfg.inference, seed, keep_chain_traces);
    ModelAdaResult generator = cfg.share_model
                                   ? inference
                                   : model_ada(net, x_test, cfg.generator, generator_seed(seed), keep_chain_traces);
    DataAdaResult data = data_ada(generator.net, x_test, cfg.data);
    BatchPrediction prediction = predict(EnergyModel(inference.net), data.x);
    return {std::move(prediction), {std::move(inference), std::move(generator), std::move(data)}};
}

} // namespace mita
