#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <vector>

#include "mita/energy.hpp"
#include "mita/langevin.hpp"
#include "mita/net.hpp"

namespace mita {

/// A model with parameters that contrastive divergence can move: it reports
/// the mean energy of a batch with its parameter gradient.
template <class M>
concept ContrastiveModel = requires(const M& m, const Matrix& x) {
    { m.mean_energy_gradient(x) } -> std::convertible_to<LossGradient>;
};

struct ContrastiveGradient {
    double loss = 0.0;            ///< mean E(positive) - mean E(negative)
    double positive_energy = 0.0; ///< mean E(positive)
    double negative_energy = 0.0; ///< mean E(negative)
    Vector grad;                  ///< gradient of `loss` in parameter space
};

/// Stochastic gradient of the contrastive objective. Descending it lowers the
/// energy of the positive (test) samples and raises it on the negatives.
template <ContrastiveModel M>
ContrastiveGradient contrastive_gradient(const M& model, const Matrix& positive, const Matrix& negative) {
    const LossGradient pos = model.mean_energy_gradient(positive);
    const LossGradient neg = model.mean_energy_gradient(negative);
    return {pos.loss - neg.loss, pos.loss, neg.loss, pos.grad - neg.grad};
}

/// ParamNet seen through its logit energy, for contrastive_gradient.
struct NetEnergy {
    const ParamNet& net;
    NormMode mode = NormMode::eval_running_stats;

    LossGradient mean_energy_gradient(const Matrix& x) const {
        return grad_params(net, x, LossHead::energy(), mode);
    }
};

/// Contrastive-divergence model adaptation settings.
struct ModelAdaConfig {
    double rate = 3e-3;    ///< beta
    std::size_t steps = 3; ///< N
    ChainConfig chain;     ///< noisy chain from p0
    ParamMask mask = ParamMask::all;
    /// Negatives per step; 0 means one per test sample.
    std::size_t num_negatives = 0;
    /// With train_batch_stats every batch (test or negatives) is normalized
    /// by its own statistics, and the adapted net leaves with the test batch
    /// statistics as its running statistics.
    NormMode norm_mode = NormMode::train_batch_stats;
    OptimizerConfig optimizer;

    /// The chain must be noisy and start from p0.
    void validate() const;
    bool operator==(const ModelAdaConfig&) const = default;
};

/// Noise-free Langevin data adaptation settings.
struct DataAdaConfig {
    double step_size = 0.01; ///< alpha_d
    std::size_t steps = 5;  ///< T_d
    std::optional<Box> clamp_box = Box{};
    NormMode norm_mode = NormMode::eval_running_stats;

    void validate() const;
    /// The equivalent noise-free chain started at the data.
    ChainConfig chain() const;
    bool operator==(const DataAdaConfig&) const = default;
};

/// Both ModelAda runs start from the same source net. The generator run
/// (used only to move the data) adapts for at least as many steps as the
/// inference run. With share_model the inference net also drives the data.
struct MitaConfig {
    ModelAdaConfig inference;
    ModelAdaConfig generator;
    DataAdaConfig data;
    bool share_model = false;

    MitaConfig();
    void validate() const;
    bool operator==(const MitaConfig&) const = default;
};

/// Energies of one chain, without its iterates.
struct ChainTrace {
    std::vector<double> energy;
    std::vector<double> grad_norm;
};

struct ModelAdaResult {
    ParamNet net;
    std::vector<double> cd_loss;         ///< one entry per accepted step
    std::vector<double> positive_energy; ///< mean E(x_test) before each update
    std::vector<double> negative_energy; ///< mean E(negatives) before each update
    double final_rate = 0.0;             ///< beta after any divergence halving
    std::vector<ChainTrace> chains;      ///< filled when traces are requested
};

/// Runs `cfg.steps` contrastive-divergence updates. Each step draws fresh
/// negatives by a noisy chain from p0 (seeded by derive_seed(seed, step)),
/// forms mean E(x_test) - mean E(negatives) and descends it on the masked
/// parameters. A non-finite step is rejected and beta halved once; a second
/// failure throws DivergenceError. N = 0 returns the net unchanged.
ModelAdaResult model_ada(const ParamNet& net, const Matrix& x_test, const ModelAdaConfig& cfg, std::uint64_t seed,
                         bool keep_chain_traces = false);

struct DataAdaResult {
    Matrix x;
    std::vector<double> energy; ///< mean energy at every iterate
    std::vector<double> grad_norm;
};

/// Moves each sample down its own energy for T_d noise-free steps starting at
/// the sample. Consumes no randomness.
DataAdaResult data_ada(const EnergySurface& surface, const Matrix& x_test, const DataAdaConfig& cfg);
DataAdaResult data_ada(const ParamNet& net, const Matrix& x_test, const DataAdaConfig& cfg);

struct AdaptOutcome {
    ModelAdaResult inference;
    /// Equal to `inference` when the model is shared.
    ModelAdaResult generator;
    DataAdaResult data;
};

struct MitaResult {
    BatchPrediction prediction;
    AdaptOutcome outcome;
};

/// Seed of the generator ModelAda run inside mita.
inline std::uint64_t generator_seed(std::uint64_t seed) noexcept { return seed ^ 1ULL; }

/// Inference net from ModelAda(seed), generator net from
/// ModelAda(generator_seed(seed)), data moved under the generator net and
/// classified by the inference net.
MitaResult run_mita(const ParamNet& net, const Matrix& x_test, const MitaConfig& cfg, std::uint64_t seed,
                    bool keep_chain_traces = false);

} // namespace mita
