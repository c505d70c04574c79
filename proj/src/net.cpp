#include "mita/net.hpp"

#include <cmath>
#include <utility>

#include "mita/error.hpp"
#include "mita/random.hpp"

namespace mita {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> weight_view(const Vector& params, const LayerLayout& l) {
    return {params.data() + l.weight, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
}

Eigen::Map<RowMajor> weight_view(Vector& params, const LayerLayout& l) {
    return {params.data() + l.weight, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
}

auto segment(const Vector& v, std::size_t offset, std::size_t n) {
    return v.segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(n));
}

auto segment(Vector& v, std::size_t offset, std::size_t n) {
    return v.segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(n));
}

/// Intermediates of one hidden layer kept for the backward pass.
struct HiddenRecord {
    Matrix input;      // activations entering the layer
    Matrix normalized; // (z - mean) / sigma, or z when no norm layer
    Matrix pre_act;    // input of the nonlinearity
    Vector mean;
    Vector var;
    Vector inv_sigma;
};

struct Tape {
    std::vector<HiddenRecord> hidden;
    Matrix last_input; // input of the output layer
    Matrix logits;
};

void check_input(const NetSpec& spec, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != spec.input_dim) {
        throw DimensionError("input has " + std::to_string(x.cols()) + " features, net expects " +
                             std::to_string(spec.input_dim));
    }
    if (x.rows() == 0) {
        throw DimensionError("empty input batch");
    }
    if (!x.allFinite()) {
        throw NumericError("non-finite input", -1);
    }
}

Matrix activate(const Matrix& y, Activation a) {
    return a == Activation::relu ? Matrix(y.cwiseMax(0.0)) : Matrix(y.array().tanh().matrix());
}

Matrix activation_slope(const Matrix& y, Activation a) {
    if (a == Activation::relu) {
        return (y.array() > 0.0).cast<double>().matrix();
    }
    return (1.0 - y.array().tanh().square()).matrix();
}

Tape run_forward(const ParamNet& net, const Matrix& x, NormMode mode, bool keep) {
    const NetSpec& spec = net.spec();
    check_input(spec, x);
    if (mode == NormMode::train_batch_stats && spec.use_norm_layers && x.rows() < 2) {
        throw StatsError("batch statistics need at least 2 samples");
    }
    const auto layers = layout(spec);
    const Vector& p = net.params();
    const auto n = static_cast<double>(x.rows());

    Tape tape;
    Matrix a = x;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        const LayerLayout& L = layers[l];
        Matrix z = a * weight_view(p, L).transpose();
        z.rowwise() += segment(p, L.bias, L.out).transpose();

        HiddenRecord rec;
        Matrix y;
        if (spec.use_norm_layers) {
            if (mode == NormMode::train_batch_stats) {
                rec.mean = z.colwise().mean().transpose();
                rec.var = (z.rowwise() - rec.mean.transpose()).array().square().colwise().sum().transpose() / n;
            } else {
                rec.mean = net.norm_stats()[l].mean;
                rec.var = net.norm_stats()[l].var;
            }
            rec.inv_sigma = (rec.var.array() + kNormEpsilon).rsqrt().matrix();
            rec.normalized = (z.rowwise() - rec.mean.transpose()) * rec.inv_sigma.asDiagonal();
            y = rec.normalized * segment(p, *L.gamma, L.out).asDiagonal();
            y.rowwise() += segment(p, *L.beta, L.out).transpose();
        } else {
            y = std::move(z);
        }
        Matrix next = activate(y, spec.activation);
        if (!next.allFinite()) {
            throw NumericError("non-finite activation", static_cast<std::ptrdiff_t>(l));
        }
        if (keep) {
            rec.input = std::move(a);
            rec.pre_act = std::move(y);
            tape.hidden.push_back(std::move(rec));
        } else if (mode == NormMode::train_batch_stats) {
            // recompute_norm_stats reads the batch statistics back
            tape.hidden.push_back(std::move(rec));
        }
        a = std::move(next);
    }
    const LayerLayout& out = layers.back();
    tape.logits = a * weight_view(p, out).transpose();
    tape.logits.rowwise() += segment(p, out.bias, out.out).transpose();
    if (!tape.logits.allFinite()) {
        throw NumericError("non-finite logits", static_cast<std::ptrdiff_t>(layers.size() - 1));
    }
    tape.last_input = std::move(a);
    return tape;
}

struct HeadResult {
    double loss = 0.0;
    Matrix dlogits;
};

Vector row_logsumexp(const Matrix& z) {
    const Vector m = z.rowwise().maxCoeff();
    return m.array() + (z.colwise() - m).array().exp().rowwise().sum().log();
}

Matrix row_softmax(const Matrix& z, const Vector& lse) {
    return (z.colwise() - lse).array().exp().matrix();
}

HeadResult evaluate_head(const Matrix& logits, const LossHead& head) {
    const auto n = static_cast<double>(logits.rows());
    const Vector lse = row_logsumexp(logits);
    const Matrix prob = row_softmax(logits, lse);
    HeadResult r;
    switch (head.kind) {
    case LossHead::Kind::mean_energy:
        r.loss = -lse.mean();
        r.dlogits = -prob / n;
        break;
    case LossHead::Kind::mean_entropy: {
        // H = lse - sum p z ; dH/dz_j = -p_j (z_j - sum p z)
        const Vector expected = prob.cwiseProduct(logits).rowwise().sum();
        r.loss = (lse - expected).mean();
        r.dlogits = -(prob.array() * (logits.colwise() - expected).array()).matrix() / n;
        break;
    }
    case LossHead::Kind::cross_entropy: {
        if (head.labels.size() != static_cast<std::size_t>(logits.rows())) {
            throw DimensionError("cross-entropy needs one label per row");
        }
        r.dlogits = prob;
        double total = 0.0;
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const int y = head.labels[static_cast<std::size_t>(i)];
            if (y < 0 || y >= logits.cols()) {
                throw DimensionError("label " + std::to_string(y) + " out of range");
            }
            total += lse(i) - logits(i, y);
            r.dlogits(i, y) -= 1.0;
        }
        r.loss = total / n;
        r.dlogits /= n;
        break;
    }
    }
    if (!std::isfinite(r.loss)) {
        throw NumericError("non-finite loss", -2);
    }
    return r;
}

/// Backpropagates dlogits through the recorded pass. Fills the parameter
/// gradient when `grad` is non-null and returns d/dx.
Matrix backward(const ParamNet& net, const Tape& tape, NormMode mode, const Matrix& dlogits, Vector* grad) {
    const NetSpec& spec = net.spec();
    const auto layers = layout(spec);
    const Vector& p = net.params();
    const auto n = static_cast<double>(dlogits.rows());

    const LayerLayout& out = layers.back();
    if (grad) {
        weight_view(*grad, out) = dlogits.transpose() * tape.last_input;
        segment(*grad, out.bias, out.out) = dlogits.colwise().sum().transpose();
    }
    Matrix da = dlogits * weight_view(p, out);

    for (std::size_t li = tape.hidden.size(); li-- > 0;) {
        const LayerLayout& L = layers[li];
        const HiddenRecord& rec = tape.hidden[li];
        Matrix dy = da.cwiseProduct(activation_slope(rec.pre_act, spec.activation));
        Matrix dz;
        if (spec.use_norm_layers) {
            if (grad) {
                segment(*grad, *L.gamma, L.out) = dy.cwiseProduct(rec.normalized).colwise().sum().transpose();
                segment(*grad, *L.beta, L.out) = dy.colwise().sum().transpose();
            }
            const Matrix dnorm = dy * segment(p, *L.gamma, L.out).asDiagonal();
            if (mode == NormMode::train_batch_stats) {
                const Eigen::RowVectorXd mean_d = dnorm.colwise().sum() / n;
                const Eigen::RowVectorXd mean_dx = dnorm.cwiseProduct(rec.normalized).colwise().sum() / n;
                Matrix centered = dnorm.rowwise() - mean_d;
                centered -= rec.normalized * mean_dx.asDiagonal();
                dz = centered * rec.inv_sigma.asDiagonal();
            } else {
                dz = dnorm * rec.inv_sigma.asDiagonal();
            }
        } else {
            dz = std::move(dy);
        }
        if (!dz.allFinite()) {
            throw NumericError("non-finite gradient", static_cast<std::ptrdiff_t>(li));
        }
        if (grad) {
            weight_view(*grad, L) = dz.transpose() * rec.input;
            segment(*grad, L.bias, L.out) = dz.colwise().sum().transpose();
        }
        da = dz * weight_view(p, L);
    }
    return da;
}

} // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

std::string to_string(NormMode m) {
    return m == NormMode::train_batch_stats ? "train_batch_stats" : "eval_running_stats";
}

std::string to_string(ParamMask m) { return m == ParamMask::all ? "all" : "norm_affine_only"; }

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw SpecError("unknown activation '" + s + "'");
}

NormMode norm_mode_from_string(const std::string& s) {
    if (s == "train_batch_stats") return NormMode::train_batch_stats;
    if (s == "eval_running_stats") return NormMode::eval_running_stats;
    throw SpecError("unknown norm mode '" + s + "'");
}

ParamMask param_mask_from_string(const std::string& s) {
    if (s == "all") return ParamMask::all;
    if (s == "norm_affine_only") return ParamMask::norm_affine_only;
    throw SpecError("unknown parameter mask '" + s + "'");
}

void NetSpec::validate() const {
    if (input_dim == 0) {
        throw SpecError("input_dim must be positive");
    }
    if (num_classes < 2) {
        throw SpecError("num_classes must be at least 2");
    }
    for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
        if (hidden_dims[i] == 0) {
            throw SpecError("hidden layer " + std::to_string(i) + " has zero width");
        }
    }
}

std::vector<LayerLayout> layout(const NetSpec& spec) {
    spec.validate();
    std::vector<LayerLayout> layers;
    std::size_t offset = 0;
    std::size_t in = spec.input_dim;
    auto add = [&](std::size_t out, bool norm) {
        LayerLayout l;
        l.in = in;
        l.out = out;
        l.weight = offset;
        offset += in * out;
        l.bias = offset;
        offset += out;
        if (norm) {
            l.gamma = offset;
            offset += out;
            l.beta = offset;
            offset += out;
        }
        layers.push_back(l);
        in = out;
    };
    for (std::size_t h : spec.hidden_dims) {
        add(h, spec.use_norm_layers);
    }
    add(spec.num_classes, false);
    return layers;
}

std::size_t NetSpec::param_count() const {
    const auto layers = layout(*this);
    const LayerLayout& last = layers.back();
    return last.bias + last.out;
}

ParamNet::ParamNet(NetSpec spec, Vector params, std::vector<NormStats> norm)
    : spec_(std::move(spec)), params_(std::move(params)), norm_(std::move(norm)) {
    const std::size_t count = spec_.param_count();
    if (static_cast<std::size_t>(params_.size()) != count) {
        throw SpecError("parameter vector has " + std::to_string(params_.size()) + " entries, spec implies " +
                        std::to_string(count));
    }
    if (norm_.size() != spec_.norm_layer_count()) {
        throw SpecError("norm state does not match the number of norm layers");
    }
    for (std::size_t l = 0; l < norm_.size(); ++l) {
        const auto width = static_cast<Eigen::Index>(spec_.hidden_dims[l]);
        if (norm_[l].mean.size() != width || norm_[l].var.size() != width) {
            throw SpecError("norm state of layer " + std::to_string(l) + " has the wrong width");
        }
        if (!(norm_[l].var.array() > 0.0).all() || !norm_[l].mean.allFinite() || !norm_[l].var.allFinite()) {
            throw SpecError("running variance of layer " + std::to_string(l) + " must be finite and positive");
        }
    }
}

ParamNet ParamNet::with_params(Vector params) const { return {spec_, std::move(params), norm_}; }

ParamNet ParamNet::with_norm_stats(std::vector<NormStats> norm) const { return {spec_, params_, std::move(norm)}; }

ParamNet init_net(const NetSpec& spec, std::uint64_t seed) {
    const auto layers = layout(spec);
    Vector params = Vector::Zero(static_cast<Eigen::Index>(spec.param_count()));
    Rng rng(seed);
    for (const LayerLayout& l : layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        for (std::size_t i = 0; i < l.in * l.out; ++i) {
            params(static_cast<Eigen::Index>(l.weight + i)) = rng.uniform(-bound, bound);
        }
        if (l.gamma) {
            segment(params, *l.gamma, l.out).setOnes();
        }
    }
    std::vector<NormStats> norm;
    for (std::size_t l = 0; l < spec.norm_layer_count(); ++l) {
        const auto w = static_cast<Eigen::Index>(spec.hidden_dims[l]);
        norm.push_back({Vector::Zero(w), Vector::Ones(w)});
    }
    return {spec, std::move(params), std::move(norm)};
}

Matrix forward(const ParamNet& net, const Matrix& x, NormMode mode) {
    return run_forward(net, x, mode, false).logits;
}

Vector forward(const ParamNet& net, const Vector& x, NormMode mode) {
    return forward(net, Matrix(x.transpose()), mode).row(0).transpose();
}

LossGradient grad_params(const ParamNet& net, const Matrix& x, const LossHead& head, NormMode mode) {
    const Tape tape = run_forward(net, x, mode, true);
    const HeadResult h = evaluate_head(tape.logits, head);
    LossGradient out;
    out.loss = h.loss;
    out.grad = Vector::Zero(net.params().size());
    backward(net, tape, mode, h.dlogits, &out.grad);
    return out;
}

LossGradient grad_params_contrastive(const ParamNet& net, const Matrix& positive, const Matrix& negative,
                                     NormMode mode) {
    LossGradient pos = grad_params(net, positive, LossHead::energy(), mode);
    const LossGradient neg = grad_params(net, negative, LossHead::energy(), mode);
    pos.loss -= neg.loss;
    pos.grad -= neg.grad;
    return pos;
}

InputGradient grad_input(const ParamNet& net, const Matrix& x, NormMode mode) {
    const Tape tape = run_forward(net, x, mode, true);
    const Vector lse = row_logsumexp(tape.logits);
    const Matrix dlogits = -row_softmax(tape.logits, lse);
    InputGradient out;
    out.energy = -lse;
    out.grad = backward(net, tape, mode, dlogits, nullptr);
    return out;
}

ParamNet recompute_norm_stats(const ParamNet& net, const Matrix& x) {
    if (x.rows() < 2) {
        throw StatsError("recomputing norm statistics needs at least 2 samples, got " + std::to_string(x.rows()));
    }
    if (!net.spec().use_norm_layers) {
        check_input(net.spec(), x);
        return net;
    }
    const Tape tape = run_forward(net, x, NormMode::train_batch_stats, false);
    std::vector<NormStats> norm;
    norm.reserve(tape.hidden.size());
    for (const HiddenRecord& rec : tape.hidden) {
        norm.push_back({rec.mean, rec.var});
    }
    return net.with_norm_stats(std::move(norm));
}

Vector mask_vector(const NetSpec& spec, ParamMask mask) {
    const auto count = static_cast<Eigen::Index>(spec.param_count());
    if (mask == ParamMask::all) {
        return Vector::Ones(count);
    }
    if (!spec.use_norm_layers) {
        throw SpecError("norm_affine_only mask needs a net with norm layers");
    }
    Vector m = Vector::Zero(count);
    for (const LayerLayout& l : layout(spec)) {
        if (l.gamma) {
            segment(m, *l.gamma, l.out).setOnes();
            segment(m, *l.beta, l.out).setOnes();
        }
    }
    return m;
}

ParamNet apply_update(const ParamNet& net, const Vector& grad, double rate, ParamMask mask) {
    if (grad.size() != net.params().size()) {
        throw DimensionError("gradient has " + std::to_string(grad.size()) + " entries, net has " +
                             std::to_string(net.params().size()));
    }
    if (mask == ParamMask::all) {
        return net.with_params(net.params() - rate * grad);
    }
    const Vector m = mask_vector(net.spec(), mask);
    return net.with_params(net.params() - rate * grad.cwiseProduct(m));
}

std::string to_string(OptimizerConfig::Kind k) {
    switch (k) {
    case OptimizerConfig::Kind::sgd: return "sgd";
    case OptimizerConfig::Kind::momentum: return "momentum";
    case OptimizerConfig::Kind::adam: return "adam";
    }
    return "sgd";
}

OptimizerConfig::Kind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerConfig::Kind::sgd;
    if (s == "momentum") return OptimizerConfig::Kind::momentum;
    if (s == "adam") return OptimizerConfig::Kind::adam;
    throw SpecError("unknown optimizer '" + s + "'");
}

ParamNet Optimizer::step(const ParamNet& net, const Vector& grad, double rate, ParamMask mask) {
    if (cfg_.kind == OptimizerConfig::Kind::sgd) {
        return apply_update(net, grad, rate, mask);
    }
    if (grad.size() != net.params().size()) {
        throw DimensionError("gradient length does not match the parameter vector");
    }
    if (velocity_.size() != grad.size()) {
        velocity_ = Vector::Zero(grad.size());
        second_ = Vector::Zero(grad.size());
        t_ = 0;
    }
    ++t_;
    Vector direction;
    if (cfg_.kind == OptimizerConfig::Kind::momentum) {
        velocity_ = cfg_.momentum * velocity_ + grad;
        direction = velocity_;
    } else {
        velocity_ = cfg_.beta1 * velocity_ + (1.0 - cfg_.beta1) * grad;
        second_ = cfg_.beta2 * second_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        direction = ((velocity_ / c1).array() / ((second_ / c2).array().sqrt() + cfg_.epsilon)).matrix();
    }
    return apply_update(net, direction, rate, mask);
}

} // namespace mita
