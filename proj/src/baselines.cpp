#include "mita/baselines.hpp"

#include <cmath>

#include "mita/error.hpp"

namespace mita {

namespace {

struct MethodName {
    Method method;
    const char* name;
};

constexpr MethodName kNames[] = {
    {Method::source, "source"},         {Method::bn_stats, "bn_stats"},   {Method::tent_entropy, "tent_entropy"},
    {Method::model_only, "model_only"}, {Method::mita_wo_m, "mita_wo_m"}, {Method::mita_same, "mita_same"},
    {Method::mita, "mita"},
};

MethodOutput tent(const ParamNet& net, const Matrix& x, const TentConfig& cfg) {
    ParamNet current = cfg.recompute_norm_stats ? recompute_norm_stats(net, x) : net;
    Optimizer optimizer(cfg.optimizer);
    std::vector<double> trace;
    for (std::size_t i = 0; i < cfg.steps; ++i) {
        const LossGradient g = grad_params(current, x, LossHead::entropy());
        trace.push_back(g.loss);
        current = optimizer.step(current, g.grad, cfg.rate, ParamMask::norm_affine_only);
    }
    BatchPrediction p = predict(EnergyModel(current), x);
    if (cfg.steps > 0) {
        trace.push_back(entropy_loss(p.prob));
    }
    return {std::move(p), std::move(current), std::nullopt, std::move(trace)};
}

} // namespace

std::string to_string(Method m) {
    for (const auto& n : kNames) {
        if (n.method == m) {
            return n.name;
        }
    }
    return "unknown";
}

Method method_from_string(const std::string& s) {
    for (const auto& n : kNames) {
        if (s == n.name) {
            return n.method;
        }
    }
    throw SpecError("unknown method '" + s + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = [] {
        std::vector<Method> v;
        for (const auto& n : kNames) {
            v.push_back(n.method);
        }
        return v;
    }();
    return methods;
}

double entropy_loss(const Matrix& prob) {
    if (prob.rows() == 0) {
        throw DimensionError("entropy of an empty batch");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < prob.rows(); ++i) {
        for (Eigen::Index k = 0; k < prob.cols(); ++k) {
            const double p = prob(i, k);
            if (p < 0.0) {
                throw DimensionError("negative probability in row " + std::to_string(i));
            }
            if (p > 0.0) {
                total -= p * std::log(p);
            }
        }
    }
    return total / static_cast<double>(prob.rows());
}

MitaConfig mita_variant(Method method, const MitaConfig& base) {
    MitaConfig cfg = base;
    switch (method) {
    case Method::mita:
        break;
    case Method::mita_wo_m:
        cfg.inference.steps = 0;
        cfg.generator.steps = 0;
        break;
    case Method::mita_same:
        cfg.share_model = true;
        break;
    default:
        throw SpecError(to_string(method) + " is not a mita variant");
    }
    return cfg;
}

MethodOutput adapt_and_predict(Method method, const ParamNet& net, const Matrix& x_test, std::uint64_t seed,
                               const MethodConfig& cfg, bool keep_chain_traces) {
    if (x_test.rows() == 0) {
        throw DimensionError("adapt_and_predict on an empty batch");
    }
    switch (method) {
    case Method::source:
        return {predict(EnergyModel(net), x_test), net, std::nullopt, {}};
    case Method::bn_stats: {
        ParamNet adapted = recompute_norm_stats(net, x_test);
        BatchPrediction p = predict(EnergyModel(adapted), x_test);
        return {std::move(p), std::move(adapted), std::nullopt, {}};
    }
    case Method::tent_entropy:
        return tent(net, x_test, cfg.tent);
    case Method::model_only: {
        ModelAdaResult r = model_ada(net, x_test, cfg.mita.inference, seed, keep_chain_traces);
        BatchPrediction p = predict(EnergyModel(r.net), x_test);
        ParamNet adapted = r.net;
        AdaptOutcome outcome{r, r, {x_test, {}, {}}};
        return {std::move(p), std::move(adapted), std::move(outcome), {}};
    }
    case Method::mita:
    case Method::mita_wo_m:
    case Method::mita_same: {
        MitaResult r = run_mita(net, x_test, mita_variant(method, cfg.mita), seed, keep_chain_traces);
        ParamNet adapted = r.outcome.inference.net;
        return {std::move(r.prediction), std::move(adapted), std::move(r.outcome), {}};
    }
    }
    throw SpecError("unhandled method");
}

} // namespace mita
