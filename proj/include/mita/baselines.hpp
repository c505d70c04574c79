#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mita/adapt.hpp"

namespace mita {

/// Test-time adaptation methods that share the adapt-and-predict interface.
enum class Method { source, bn_stats, tent_entropy, model_only, mita, mita_wo_m, mita_same };

std::string to_string(Method m);
/// Throws SpecError for an unknown name.
Method method_from_string(const std::string& s);
/// All methods in report order.
const std::vector<Method>& all_methods();

/// Entropy minimization over the norm-layer affine parameters.
struct TentConfig {
    std::size_t steps = 10;
    double rate = 1e-2;
    /// Replace the running statistics by the test batch statistics first.
    bool recompute_norm_stats = true;
    OptimizerConfig optimizer;

    bool operator==(const TentConfig&) const = default;
};

struct MethodConfig {
    MitaConfig mita;
    TentConfig tent;

    bool operator==(const MethodConfig&) const = default;
};

struct MethodOutput {
    BatchPrediction prediction;
    /// Net used for inference; carried to the next batch in online runs.
    ParamNet adapted_net;
    /// Set by the energy-based methods.
    std::optional<AdaptOutcome> outcome;
    /// tent_entropy only: mean entropy before each step and after the last.
    std::vector<double> entropy_trace;
};

/// Mean over rows of -sum p log p (0 log 0 = 0). Throws DimensionError on a
/// negative probability.
double entropy_loss(const Matrix& prob);

/// Adapts a private copy of `net` to `x_test` with the chosen method and
/// classifies the batch. The caller's net is never modified.
///
///   source        eval-mode predictions of the net as given
///   bn_stats      recompute norm statistics on the batch, then predict
///   tent_entropy  optional stats recompute, then entropy descent on the
///                 norm affine parameters
///   model_only    ModelAda with the inference config, predict raw data
///   mita          full pipeline
///   mita_wo_m     no model adaptation, data moved under the source net
///   mita_same     one adapted net for both data movement and inference
MethodOutput adapt_and_predict(Method method, const ParamNet& net, const Matrix& x_test, std::uint64_t seed,
                               const MethodConfig& cfg = {}, bool keep_chain_traces = false);

/// The MitaConfig that `method` runs (for the mita variants).
MitaConfig mita_variant(Method method, const MitaConfig& base);

} // namespace mita
