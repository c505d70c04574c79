#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "mita/net.hpp"
#include "mita/random.hpp"

namespace mita::testing {

inline constexpr double kFdStep = 1e-5;
/// Denominator floor for relative errors: entries whose exact and numeric
/// values are both below it are compared absolutely against it.
inline constexpr double kFdFloor = 1e-6;

inline double relative_error(double exact, double numeric) {
    return std::abs(exact - numeric) / std::max({std::abs(exact), std::abs(numeric), kFdFloor});
}

/// Central differences of a scalar function around `at`.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& at, double h = kFdStep) {
    Vector g(at.size());
    Vector p = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        const double keep = p(i);
        p(i) = keep + h;
        const double up = f(p);
        p(i) = keep - h;
        const double down = f(p);
        p(i) = keep;
        g(i) = (up - down) / (2.0 * h);
    }
    return g;
}

inline double max_relative_error(const Vector& exact, const Vector& numeric) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < exact.size(); ++i) {
        worst = std::max(worst, relative_error(exact(i), numeric(i)));
    }
    return worst;
}

/// A randomly shaped net, batch and loss head for gradient checks.
struct GradCase {
    ParamNet net;
    Matrix x;
    LossHead head;
    NormMode mode;
};

inline GradCase random_grad_case(std::uint64_t seed) {
    Rng rng(seed);
    NetSpec spec;
    spec.input_dim = 1 + rng.below(4);
    spec.num_classes = 2 + rng.below(3);
    const auto depth = rng.below(3);
    for (std::uint64_t i = 0; i < depth; ++i) {
        spec.hidden_dims.push_back(1 + rng.below(5));
    }
    spec.activation = rng.below(2) == 0 ? Activation::tanh : Activation::relu;
    spec.use_norm_layers = depth > 0 && rng.below(2) == 0;

    ParamNet base = init_net(spec, rng.next_u64());
    Vector params = base.params();
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        params(i) += rng.uniform(-0.5, 0.5);
    }
    std::vector<NormStats> stats;
    for (const NormStats& s : base.norm_stats()) {
        NormStats r = s;
        for (Eigen::Index i = 0; i < r.mean.size(); ++i) {
            r.mean(i) = rng.uniform(-0.5, 0.5);
            r.var(i) = rng.uniform(0.5, 2.0);
        }
        stats.push_back(std::move(r));
    }
    ParamNet net(spec, params, stats);

    const auto n = static_cast<Eigen::Index>(2 + rng.below(4));
    Matrix x(n, static_cast<Eigen::Index>(spec.input_dim));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            x(r, c) = rng.uniform(-1.5, 1.5);
        }
    }
    LossHead head;
    switch (rng.below(3)) {
    case 0: head = LossHead::energy(); break;
    case 1: head = LossHead::entropy(); break;
    default: {
        std::vector<int> labels;
        for (Eigen::Index r = 0; r < n; ++r) {
            labels.push_back(static_cast<int>(rng.below(spec.num_classes)));
        }
        head = LossHead::cross_entropy(labels);
    }
    }
    const NormMode mode =
        spec.use_norm_layers && rng.below(2) == 0 ? NormMode::train_batch_stats : NormMode::eval_running_stats;
    return {std::move(net), std::move(x), std::move(head), mode};
}

inline double loss_at(const GradCase& c, const Vector& params) {
    return grad_params(c.net.with_params(params), c.x, c.head, c.mode).loss;
}

/// Sum of per-row energies as a function of the flattened (row-major) batch.
inline double energy_sum_at(const GradCase& c, const Vector& flat) {
    Matrix x(c.x.rows(), c.x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            x(r, k) = flat(r * x.cols() + k);
        }
    }
    return grad_input(c.net, x, c.mode).energy.sum();
}

inline Vector flatten(const Matrix& m) {
    Vector v(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            v(r * m.cols() + k) = m(r, k);
        }
    }
    return v;
}

} // namespace mita::testing
