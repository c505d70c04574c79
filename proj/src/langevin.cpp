#include "mita/langevin.hpp"

#include <cmath>
#include <ostream>

#include "mita/error.hpp"

namespace mita {

namespace {

EnergyEval evaluate_at(const EnergySurface& m, const Matrix& x, std::size_t step) {
    EnergyEval e;
    try {
        e = m.evaluate(x);
    } catch (const NumericError& err) {
        throw ChainError(err.what(), step);
    }
    if (!e.grad.allFinite()) {
        throw ChainError("non-finite energy gradient", step);
    }
    if (!e.energy.allFinite()) {
        throw ChainError("non-finite energy", step);
    }
    return e;
}

double mean_row_norm(const Matrix& g) { return g.rowwise().norm().mean(); }

Matrix advance(const Matrix& x, Matrix grad, const ChainConfig& cfg, std::span<Rng> rngs, std::size_t step) {
    if (cfg.grad_clip) {
        for (Eigen::Index i = 0; i < grad.rows(); ++i) {
            const double norm = grad.row(i).norm();
            if (norm > *cfg.grad_clip) {
                grad.row(i) *= *cfg.grad_clip / norm;
            }
        }
    }
    Matrix next = x - 0.5 * cfg.step_size * grad;
    if (cfg.noise == NoiseScale::sqrt_alpha) {
        if (rngs.size() != static_cast<std::size_t>(x.rows())) {
            throw ChainError("noisy step needs one generator per row", step);
        }
        const double scale = std::sqrt(cfg.step_size);
        for (Eigen::Index i = 0; i < next.rows(); ++i) {
            Rng& rng = rngs[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < next.cols(); ++j) {
                next(i, j) += scale * rng.normal();
            }
        }
    }
    if (cfg.clamp_box) {
        next = next.cwiseMax(cfg.clamp_box->lo).cwiseMin(cfg.clamp_box->hi);
    }
    if (!next.allFinite()) {
        throw ChainError("non-finite iterate", step);
    }
    return next;
}

std::vector<Rng> row_generators(std::uint64_t seed, std::size_t rows) {
    std::vector<Rng> rngs;
    rngs.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        rngs.emplace_back(chain_stream_seed(seed, i));
    }
    return rngs;
}

} // namespace

std::string to_string(NoiseScale n) { return n == NoiseScale::sqrt_alpha ? "sqrt_alpha" : "zero"; }

std::string to_string(ChainInit i) { return i == ChainInit::from_noise_p0 ? "from_noise_p0" : "from_given_x"; }

NoiseScale noise_scale_from_string(const std::string& s) {
    if (s == "sqrt_alpha") return NoiseScale::sqrt_alpha;
    if (s == "zero") return NoiseScale::zero;
    throw SpecError("unknown noise scale '" + s + "'");
}

ChainInit chain_init_from_string(const std::string& s) {
    if (s == "from_noise_p0") return ChainInit::from_noise_p0;
    if (s == "from_given_x") return ChainInit::from_given_x;
    throw SpecError("unknown chain init '" + s + "'");
}

void ChainConfig::validate() const {
    if (steps > 0 && !(step_size > 0.0)) {
        throw SpecError("chain step size must be positive");
    }
    if (clamp_box && !(clamp_box->lo < clamp_box->hi)) {
        throw SpecError("clamp box needs lo < hi");
    }
    if (!(p0_box.lo < p0_box.hi)) {
        throw SpecError("p0 box needs lo < hi");
    }
    if (grad_clip && !(*grad_clip > 0.0)) {
        throw SpecError("gradient clip must be positive");
    }
}

std::uint64_t chain_stream_seed(std::uint64_t seed, std::size_t row) noexcept { return derive_seed(seed, row); }

std::uint64_t chain_init_seed(std::uint64_t seed) noexcept { return derive_seed(seed, ~std::uint64_t{0}); }

Matrix sample_p0(std::size_t dim, std::size_t n, std::uint64_t seed, Box box) {
    if (n == 0) {
        throw SpecError("sample_p0 needs n >= 1");
    }
    if (dim == 0) {
        throw SpecError("sample_p0 needs dim >= 1");
    }
    if (!(box.lo < box.hi)) {
        throw SpecError("p0 box needs lo < hi");
    }
    Rng rng(seed);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            x(i, j) = rng.uniform(box.lo, box.hi);
        }
    }
    return x;
}

StepResult sgld_step(const EnergySurface& m, const Matrix& x, const ChainConfig& cfg, std::span<Rng> row_rngs,
                     std::size_t step_index) {
    cfg.validate();
    if (!x.allFinite()) {
        throw ChainError("non-finite chain input", step_index);
    }
    EnergyEval e = evaluate_at(m, x, step_index);
    StepResult r;
    r.grad_norm = mean_row_norm(e.grad);
    r.energy = std::move(e.energy);
    r.x = advance(x, std::move(e.grad), cfg, row_rngs, step_index);
    return r;
}

ChainState run_chain(const EnergySurface& m, const ChainConfig& cfg, std::uint64_t seed,
                     const std::optional<Matrix>& x0, std::size_t dim, std::size_t n) {
    cfg.validate();
    ChainState state;
    if (cfg.init == ChainInit::from_given_x) {
        if (!x0) {
            throw SpecError("a chain started from given data needs x0");
        }
        state.x = *x0;
    } else {
        if (x0) {
            dim = static_cast<std::size_t>(x0->cols());
            n = static_cast<std::size_t>(x0->rows());
        }
        state.x = sample_p0(dim, n, chain_init_seed(seed), cfg.p0_box);
    }
    if (!state.x.allFinite()) {
        throw ChainError("non-finite chain input", 0);
    }

    std::vector<Rng> rngs;
    if (cfg.noise == NoiseScale::sqrt_alpha) {
        rngs = row_generators(seed, static_cast<std::size_t>(state.x.rows()));
    }

    EnergyEval e = evaluate_at(m, state.x, 0);
    state.energy_trace.push_back(e.energy.mean());
    state.grad_norm_trace.push_back(mean_row_norm(e.grad));
    for (std::size_t t = 0; t < cfg.steps; ++t) {
        state.x = advance(state.x, std::move(e.grad), cfg, rngs, t);
        e = evaluate_at(m, state.x, t + 1);
        state.energy_trace.push_back(e.energy.mean());
        state.grad_norm_trace.push_back(mean_row_norm(e.grad));
        state.step_index = t + 1;
    }
    return state;
}

void write_chain_trace_csv(std::ostream& os, const ChainState& state) {
    os << "step,mean_energy,grad_norm\n";
    os.precision(17);
    for (std::size_t t = 0; t < state.energy_trace.size(); ++t) {
        os << t << ',' << state.energy_trace[t] << ',' << state.grad_norm_trace[t] << '\n';
    }
}

} // namespace mita
