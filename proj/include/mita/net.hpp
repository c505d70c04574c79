#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mita {

/// Batches are row-major in meaning: one row per sample.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh };

/// Which statistics a normalization layer uses during a forward pass.
enum class NormMode { train_batch_stats, eval_running_stats };

/// Which parameters an update may touch.
enum class ParamMask { all, norm_affine_only };

std::string to_string(Activation a);
std::string to_string(NormMode m);
std::string to_string(ParamMask m);
Activation activation_from_string(const std::string& s);
NormMode norm_mode_from_string(const std::string& s);
ParamMask param_mask_from_string(const std::string& s);

/// Shape of a feed-forward classifier.
///
/// Each hidden layer is Linear -> [Norm(affine)] -> activation; the output
/// layer is a plain Linear producing `num_classes` logits.
struct NetSpec {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_dims;
    std::size_t num_classes = 2;
    Activation activation = Activation::relu;
    bool use_norm_layers = false;

    /// Throws SpecError for zero dimensions or fewer than two classes.
    void validate() const;
    std::size_t param_count() const;
    std::size_t norm_layer_count() const { return use_norm_layers ? hidden_dims.size() : 0; }

    bool operator==(const NetSpec&) const = default;
};

/// Offsets of one linear layer (and its optional norm affine) inside the
/// flat parameter vector. Weights are stored row-major as out x in.
struct LayerLayout {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight = 0;
    std::size_t bias = 0;
    std::optional<std::size_t> gamma;
    std::optional<std::size_t> beta;
};

/// Per-layer parameter layout in declaration order; the last entry is the
/// output layer.
std::vector<LayerLayout> layout(const NetSpec& spec);

struct NormStats {
    Vector mean;
    Vector var;

    bool operator==(const NormStats& o) const { return mean == o.mean && var == o.var; }
};

/// Classifier with an explicit flat parameter vector. Immutable after
/// construction; every operation returns a new net.
class ParamNet {
public:
    /// Throws SpecError if the parameter count or norm-state shapes do not
    /// match the net spec, or if a running variance is not strictly positive.
    ParamNet(NetSpec spec, Vector params, std::vector<NormStats> norm);

    const NetSpec& spec() const noexcept { return spec_; }
    const Vector& params() const noexcept { return params_; }
    const std::vector<NormStats>& norm_stats() const noexcept { return norm_; }

    ParamNet with_params(Vector params) const;
    ParamNet with_norm_stats(std::vector<NormStats> norm) const;

    bool operator==(const ParamNet& o) const {
        return spec_ == o.spec_ && params_ == o.params_ && norm_ == o.norm_;
    }

private:
    NetSpec spec_;
    Vector params_;
    std::vector<NormStats> norm_;
};

/// Epsilon added to the variance inside every normalization layer.
inline constexpr double kNormEpsilon = 1e-5;

/// Fresh network. Weight matrices are uniform in +-sqrt(6 / (fan_in +
/// fan_out)), filled row-major layer by layer from one Rng(seed); biases and
/// norm shifts are zero, norm scales one, running means zero and running
/// variances one.
ParamNet init_net(const NetSpec& spec, std::uint64_t seed);

/// Logits for a batch (n x input_dim -> n x K).
Matrix forward(const ParamNet& net, const Matrix& x, NormMode mode = NormMode::eval_running_stats);
/// Logits for one sample.
Vector forward(const ParamNet& net, const Vector& x, NormMode mode = NormMode::eval_running_stats);

/// Differentiable scalar losses of the logits.
struct LossHead {
    enum class Kind { mean_energy, mean_entropy, cross_entropy };

    Kind kind = Kind::mean_energy;
    std::vector<int> labels; ///< cross_entropy only

    static LossHead energy() { return {Kind::mean_energy, {}}; }
    static LossHead entropy() { return {Kind::mean_entropy, {}}; }
    static LossHead cross_entropy(std::vector<int> labels) { return {Kind::cross_entropy, std::move(labels)}; }
};

struct LossGradient {
    double loss = 0.0;
    Vector grad;
};

/// Exact reverse-mode gradient of a loss head with respect to the parameters.
LossGradient grad_params(const ParamNet& net, const Matrix& x, const LossHead& head,
                         NormMode mode = NormMode::eval_running_stats);

/// Gradient of mean E(positive) - mean E(negative) with respect to the parameters.
LossGradient grad_params_contrastive(const ParamNet& net, const Matrix& positive, const Matrix& negative,
                                     NormMode mode = NormMode::eval_running_stats);

struct InputGradient {
    Vector energy; ///< per-row energy -logsumexp(logits)
    Matrix grad;   ///< d(sum of energies) / dx, same shape as x
};

/// Energy of each row and its gradient with respect to the input. In eval
/// mode row i of the gradient is exactly dE(x_i)/dx_i.
InputGradient grad_input(const ParamNet& net, const Matrix& x, NormMode mode = NormMode::eval_running_stats);

/// Replaces the running statistics of every norm layer by the batch
/// statistics (population variance), layer by layer. Requires >= 2 rows.
ParamNet recompute_norm_stats(const ParamNet& net, const Matrix& x);

/// 1.0 where the mask lets a parameter change, 0.0 elsewhere.
Vector mask_vector(const NetSpec& spec, ParamMask mask);

/// params <- params - rate * grad, restricted to the mask.
ParamNet apply_update(const ParamNet& net, const Vector& grad, double rate, ParamMask mask = ParamMask::all);

struct OptimizerConfig {
    enum class Kind { sgd, momentum, adam };
    Kind kind = Kind::sgd;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const OptimizerConfig&) const = default;
};

std::string to_string(OptimizerConfig::Kind k);
OptimizerConfig::Kind optimizer_from_string(const std::string& s);

/// Stateful first-order optimizer over a net's parameter vector. The plain
/// sgd kind reduces to apply_update.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

    ParamNet step(const ParamNet& net, const Vector& grad, double rate, ParamMask mask = ParamMask::all);

private:
    OptimizerConfig cfg_;
    Vector velocity_;
    Vector second_;
    std::size_t t_ = 0;
};

/// Checkpoint layout, all little-endian:
///   "MITANET1"
///   u64 input_dim, u64 hidden count, u64 hidden_dims..., u64 num_classes,
///   u64 activation (0 relu, 1 tanh), u64 use_norm_layers (0/1)
///   f64 params in layout order
///   per norm layer: f64 running mean[h], f64 running var[h]
void write_net(std::ostream& os, const ParamNet& net);
ParamNet read_net(std::istream& is);
void save_net(const std::string& path, const ParamNet& net);
ParamNet load_net(const std::string& path);

} // namespace mita
