#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mita/error.hpp"
#include "mita/langevin.hpp"

using namespace mita;

namespace {

/// E(x) = lambda / 2 * |x|^2 per row.
class Quadratic final : public EnergySurface {
public:
    explicit Quadratic(double lambda) : lambda_(lambda) {}
    EnergyEval evaluate(const Matrix& x) const override {
        return {0.5 * lambda_ * x.rowwise().squaredNorm(), lambda_ * x};
    }

private:
    double lambda_;
};

class Flat final : public EnergySurface {
public:
    EnergyEval evaluate(const Matrix& x) const override {
        return {Vector::Zero(x.rows()), Matrix::Zero(x.rows(), x.cols())};
    }
};

/// Quadratic that reports a NaN gradient once x has moved below `trip`.
class Tripwire final : public EnergySurface {
public:
    EnergyEval evaluate(const Matrix& x) const override {
        EnergyEval e{0.5 * x.rowwise().squaredNorm(), x};
        if (x(0, 0) < 0.5) {
            e.grad(0, 0) = std::nan("");
        }
        return e;
    }
};

ChainConfig descent(double alpha, std::size_t steps) {
    ChainConfig c;
    c.step_size = alpha;
    c.steps = steps;
    c.noise = NoiseScale::zero;
    c.init = ChainInit::from_given_x;
    c.clamp_box = std::nullopt;
    c.grad_clip = std::nullopt;
    return c;
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

} // namespace

TEST_CASE("one noise-free step on a quadratic") {
    const StepResult r = sgld_step(Quadratic(1.0), scalar(1.0), descent(0.5, 1), {});
    CHECK(r.x(0, 0) == 0.75);
    CHECK(r.energy(0) == 0.5);
    CHECK(r.grad_norm == 1.0);

    Matrix x(2, 3);
    x << 0.1, -0.2, 0.3, 0.5, 0.0, -0.9;
    CHECK(sgld_step(Flat(), x, descent(0.7, 1), {}).x == x);
}

TEST_CASE("noisy step replays the seeded generator") {
    ChainConfig cfg = descent(0.5, 1);
    cfg.noise = NoiseScale::sqrt_alpha;
    const std::uint64_t seed = 1234;
    std::vector<Rng> rngs{Rng(chain_stream_seed(seed, 0))};
    const StepResult r = sgld_step(Quadratic(1.0), scalar(1.0), cfg, rngs);
    Rng replay(chain_stream_seed(seed, 0));
    CHECK(r.x(0, 0) == 0.75 + std::sqrt(0.5) * replay.normal());

    // run_chain uses the same per-row streams.
    const ChainState s = run_chain(Quadratic(1.0), cfg, seed, scalar(1.0));
    CHECK(s.x(0, 0) == r.x(0, 0));
}

TEST_CASE("noise-free chains follow the geometric closed form") {
    const ChainState s = run_chain(Quadratic(1.0), descent(0.5, 3), 0, scalar(1.0));
    CHECK(s.x(0, 0) == doctest::Approx(0.421875).epsilon(1e-15));
    CHECK(s.energy_trace.size() == 4);
    CHECK(s.step_index == 3);

    for (double lambda : {0.1, 0.5, 1.0, 2.0, 3.5}) {
        for (double alpha : {0.01, 0.1, 0.5, 1.0}) {
            for (std::size_t t : {0, 1, 2, 5, 13, 50}) {
                Matrix x0(2, 2);
                x0 << 1.0, -0.5, 0.25, 2.0;
                const ChainState c = run_chain(Quadratic(lambda), descent(alpha, t), 0, x0);
                const double factor = std::pow(1.0 - alpha * lambda / 2.0, static_cast<double>(t));
                CHECK((c.x - factor * x0).cwiseAbs().maxCoeff() <= 1e-12);
                CHECK(c.energy_trace.size() == t + 1);
            }
        }
    }
}

TEST_CASE("zero steps return the input with a one-entry trace") {
    Matrix x(1, 2);
    x << 0.3, -0.4;
    const ChainState s = run_chain(Quadratic(2.0), descent(0.5, 0), 0, x);
    CHECK(s.x == x);
    CHECK(s.energy_trace.size() == 1);
    CHECK(s.energy_trace[0] == doctest::Approx(0.25));
}

TEST_CASE("stable noise-free chains never increase the energy") {
    for (double lambda : {0.3, 1.0, 4.0}) {
        const double alpha = 1.9 / lambda;
        Matrix x0(3, 2);
        x0 << 1.0, 1.0, -2.0, 0.5, 0.0, 3.0;
        const ChainState s = run_chain(Quadratic(lambda), descent(alpha, 30), 0, x0);
        for (std::size_t t = 1; t < s.energy_trace.size(); ++t) {
            CHECK(s.energy_trace[t] <= s.energy_trace[t - 1]);
        }
    }
}

TEST_CASE("iterates stay inside the clamp box") {
    ChainConfig cfg;
    cfg.step_size = 1.0;
    cfg.steps = 1;
    cfg.clamp_box = Box{-0.5, 0.8};
    const Quadratic q(0.2);
    Matrix x = sample_p0(3, 64, 5, Box{-0.5, 0.8});
    std::vector<Rng> rngs;
    for (std::size_t i = 0; i < 64; ++i) {
        rngs.emplace_back(chain_stream_seed(9, i));
    }
    for (std::size_t t = 0; t < 25; ++t) {
        x = sgld_step(q, x, cfg, rngs, t).x;
        CHECK(x.minCoeff() >= -0.5);
        CHECK(x.maxCoeff() <= 0.8);
    }
}

TEST_CASE("gradient clipping limits each sample's gradient norm") {
    ChainConfig cfg = descent(0.5, 1);
    cfg.grad_clip = 10.0;
    Matrix x(2, 2);
    x << 20.0, 0.0, 3.0, 4.0;
    const StepResult r = sgld_step(Quadratic(1.0), x, cfg, {});
    CHECK(r.x(0, 0) == doctest::Approx(17.5));
    CHECK(r.x(0, 1) == 0.0);
    CHECK(r.x(1, 0) == doctest::Approx(2.25));
    CHECK(r.x(1, 1) == doctest::Approx(3.0));
    CHECK(r.grad_norm == doctest::Approx(12.5));
}

TEST_CASE("noisy chains are reproducible under a fixed seed") {
    ChainConfig cfg;
    cfg.steps = 20;
    const Quadratic q(1.0);
    const ChainState a = run_chain(q, cfg, 77, std::nullopt, 3, 10);
    const ChainState b = run_chain(q, cfg, 77, std::nullopt, 3, 10);
    CHECK(a.x == b.x);
    CHECK(a.energy_trace == b.energy_trace);
    const ChainState c = run_chain(q, cfg, 78, std::nullopt, 3, 10);
    CHECK_FALSE(a.x == c.x);
    CHECK(a.x.rows() == 10);
    CHECK(a.x.cols() == 3);
}

TEST_CASE("uniform initial samples") {
    const Matrix one = sample_p0(2, 1, 3);
    CHECK(one.rows() == 1);
    CHECK(one.cols() == 2);
    CHECK(one.cwiseAbs().maxCoeff() <= 1.0);
    CHECK_THROWS_AS(sample_p0(2, 0, 3), SpecError);
    CHECK(sample_p0(4, 5, 8) == sample_p0(4, 5, 8));

    const Matrix many = sample_p0(2, 10000, 12);
    CHECK(many.minCoeff() >= -1.0);
    CHECK(many.maxCoeff() < 1.0);
    CHECK(std::abs(many.mean()) < 0.05);
    // Uniform on [-1, 1] has variance 1/3.
    CHECK(std::abs(many.array().square().mean() - 1.0 / 3.0) < 0.05);
}

TEST_CASE("chain failures carry the step index") {
    ChainConfig cfg = descent(0.5, 10);
    try {
        run_chain(Tripwire(), cfg, 0, scalar(1.0));
        FAIL("expected a chain error");
    } catch (const ChainError& e) {
        // 1 -> 0.75 -> 0.5625 -> 0.421875: the third iterate trips the wire.
        CHECK(e.step() == 3);
    }
    CHECK_THROWS_AS(run_chain(Quadratic(1.0), cfg, 0), SpecError);
    Matrix bad = scalar(std::nan(""));
    CHECK_THROWS_AS(sgld_step(Quadratic(1.0), bad, cfg, {}), ChainError);
}

TEST_CASE("config validation") {
    ChainConfig c;
    c.step_size = 0.0;
    CHECK_THROWS_AS(c.validate(), SpecError);
    c.steps = 0;
    CHECK_NOTHROW(c.validate());
    ChainConfig box;
    box.clamp_box = Box{1.0, 1.0};
    CHECK_THROWS_AS(box.validate(), SpecError);
    ChainConfig clip;
    clip.grad_clip = 0.0;
    CHECK_THROWS_AS(clip.validate(), SpecError);
}

TEST_CASE("trace csv") {
    const ChainState s = run_chain(Quadratic(1.0), descent(0.5, 2), 0, scalar(1.0));
    std::ostringstream os;
    write_chain_trace_csv(os, s);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "step,mean_energy,grad_norm");
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
    }
    CHECK(rows == 3);
    CHECK(os.str().find("\n0,0.5,1\n") != std::string::npos);
}
