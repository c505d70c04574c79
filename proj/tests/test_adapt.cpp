#include <doctest.h>

#include <cmath>

#include "mita/adapt.hpp"
#include "mita/error.hpp"
#include "mita/scenarios.hpp"

using namespace mita;

namespace {

NetSpec small_spec(bool norm = true) {
    NetSpec s;
    s.input_dim = 2;
    s.hidden_dims = {8};
    s.num_classes = 3;
    s.use_norm_layers = norm;
    return s;
}

Matrix batch(std::size_t n, std::uint64_t seed) { return sample_p0(2, n, seed, Box{-0.8, 0.8}); }

class Quadratic final : public EnergySurface {
public:
    EnergyEval evaluate(const Matrix& x) const override { return {0.5 * x.rowwise().squaredNorm(), x}; }
};

/// E_theta(x) = theta * x on the finite domain {-1, 0, 1, 2}.
struct ExpFamily {
    double theta;
    LossGradient mean_energy_gradient(const Matrix& x) const {
        const double m = x.col(0).mean();
        return {theta * m, Vector::Constant(1, m)};
    }
};

static_assert(ContrastiveModel<ExpFamily>);
static_assert(ContrastiveModel<NetEnergy>);

} // namespace

TEST_CASE("zero adaptation steps return the net unchanged") {
    const ParamNet net = init_net(small_spec(), 3);
    ModelAdaConfig cfg;
    cfg.steps = 0;
    const ModelAdaResult r = model_ada(net, batch(16, 1), cfg, 5);
    CHECK(r.net == net);
    CHECK(r.cd_loss.empty());
}

TEST_CASE("zero rate keeps the parameters and still records every loss") {
    const ParamNet net = init_net(small_spec(), 3);
    ModelAdaConfig cfg;
    cfg.steps = 5;
    cfg.rate = 0.0;
    const ModelAdaResult r = model_ada(net, batch(16, 1), cfg, 5);
    CHECK(r.net.params() == net.params());
    REQUIRE(r.cd_loss.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::isfinite(r.cd_loss[i]));
        CHECK(r.cd_loss[i] == doctest::Approx(r.positive_energy[i] - r.negative_energy[i]));
    }
}

TEST_CASE("one adaptation step replays its documented pieces") {
    const ParamNet net = init_net(small_spec(false), 4);
    const Matrix x = batch(12, 2);
    ModelAdaConfig cfg;
    cfg.steps = 1;
    cfg.rate = 0.05;
    cfg.norm_mode = NormMode::eval_running_stats;
    const std::uint64_t seed = 99;
    const ModelAdaResult r = model_ada(net, x, cfg, seed, true);

    const ChainState negatives =
        run_chain(EnergyModel(net), cfg.chain, derive_seed(derive_seed(seed, 0), 0), std::nullopt, 2, 12);
    const LossGradient g = grad_params_contrastive(net, x, negatives.x);
    CHECK(r.net.params() == net.params() - 0.05 * g.grad);
    CHECK(r.cd_loss[0] == g.loss);
    REQUIRE(r.chains.size() == 1);
    CHECK(r.chains[0].energy == negatives.energy_trace);
}

TEST_CASE("batch-statistics adaptation leaves the test batch statistics in the net") {
    const ParamNet net = init_net(small_spec(), 4);
    const Matrix x = batch(32, 6);
    ModelAdaConfig cfg;
    cfg.steps = 2;
    cfg.norm_mode = NormMode::train_batch_stats;
    const ModelAdaResult r = model_ada(net, x, cfg, 1);
    const ParamNet expected = recompute_norm_stats(r.net, x);
    CHECK(r.net == expected);
    CHECK((forward(r.net, x) - forward(r.net, x, NormMode::train_batch_stats)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("contrastive gradient matches the exponential-family oracle") {
    const double theta = 0.7;
    const std::vector<double> domain{-1.0, 0.0, 1.0, 2.0};
    std::vector<double> weight;
    double z = 0.0;
    for (double v : domain) {
        weight.push_back(std::exp(-theta * v));
        z += weight.back();
    }
    double mean = 0.0;
    double second = 0.0;
    for (std::size_t i = 0; i < domain.size(); ++i) {
        mean += domain[i] * weight[i] / z;
        second += domain[i] * domain[i] * weight[i] / z;
    }
    const double sd = std::sqrt(second - mean * mean);

    Matrix data(5, 1);
    data << -1.0, 0.0, 2.0, 1.0, 1.0;
    const double data_mean = 0.6;

    // Exact draws from p_theta by inverting the CDF.
    const std::size_t n = 10000;
    Matrix negatives(static_cast<Eigen::Index>(n), 1);
    Rng rng(2024);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform01() * z;
        double acc = 0.0;
        std::size_t k = 0;
        while (k + 1 < domain.size() && acc + weight[k] <= u) {
            acc += weight[k];
            ++k;
        }
        negatives(static_cast<Eigen::Index>(i), 0) = domain[k];
    }
    const ContrastiveGradient g = contrastive_gradient(ExpFamily{theta}, data, negatives);
    // d/dtheta [mean E(data) - mean E(neg)] estimates mean g(data) - E_p[g].
    const double analytic = data_mean - mean;
    CHECK(std::abs(g.grad(0) - analytic) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
    CHECK(g.loss == doctest::Approx(theta * data_mean - theta * negatives.mean()));
}

TEST_CASE("data adaptation on a quadratic stub") {
    Matrix x(1, 2);
    x << 1.0, 1.0;
    DataAdaConfig cfg;
    cfg.step_size = 0.5;
    cfg.steps = 2;
    const DataAdaResult r = data_ada(Quadratic(), x, cfg);
    CHECK(r.x(0, 0) == 0.5625);
    CHECK(r.x(0, 1) == 0.5625);
    CHECK(r.energy.size() == 3);
    CHECK(r.energy.back() <= r.energy.front());

    cfg.steps = 0;
    CHECK(data_ada(Quadratic(), x, cfg).x == x);
}

TEST_CASE("data adaptation is deterministic and per-sample") {
    const ParamNet net = init_net(small_spec(), 8);
    const Matrix x = batch(10, 3);
    DataAdaConfig cfg;
    const DataAdaResult a = data_ada(net, x, cfg);
    const DataAdaResult b = data_ada(net, x, cfg);
    CHECK(a.x == b.x);
    const DataAdaResult first = data_ada(net, x.topRows(1), cfg);
    CHECK((first.x.row(0) - a.x.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pipeline degenerations") {
    const ParamNet net = init_net(small_spec(), 12);
    const Matrix x = batch(24, 4);

    MitaConfig none;
    none.inference.steps = 0;
    none.generator.steps = 0;
    none.data.steps = 0;
    const MitaResult src = run_mita(net, x, none, 7);
    CHECK(src.prediction.labels == predict(EnergyModel(net), x).labels);
    CHECK(src.prediction.prob == predict(EnergyModel(net), x).prob);

    MitaConfig no_data;
    no_data.data.steps = 0;
    const MitaResult m = run_mita(net, x, no_data, 7);
    const ModelAdaResult model_only = model_ada(net, x, no_data.inference, 7);
    CHECK(m.prediction.prob == predict(EnergyModel(model_only.net), x).prob);
    CHECK(m.outcome.inference.net == model_only.net);
    CHECK(m.outcome.generator.net == model_ada(net, x, no_data.generator, generator_seed(7)).net);

    MitaConfig same;
    same.share_model = true;
    const MitaResult s = run_mita(net, x, same, 7);
    CHECK(s.outcome.inference.net == s.outcome.generator.net);
    CHECK(s.outcome.data.x == data_ada(s.outcome.inference.net, x, same.data).x);

    MitaConfig no_model;
    no_model.inference.steps = 0;
    no_model.generator.steps = 0;
    const MitaResult d = run_mita(net, x, no_model, 7);
    CHECK(d.outcome.inference.net == net);
    CHECK(d.prediction.prob == predict(EnergyModel(net), data_ada(net, x, no_model.data).x).prob);
}

TEST_CASE("configuration checks") {
    MitaConfig cfg;
    CHECK(cfg.generator.steps == 15);
    CHECK(cfg.inference.steps == 3);
    cfg.generator.steps = 2;
    CHECK_THROWS_AS(cfg.validate(), SpecError);
    ModelAdaConfig quiet;
    quiet.chain.noise = NoiseScale::zero;
    CHECK_THROWS_AS(quiet.validate(), SpecError);
    ModelAdaConfig given;
    given.chain.init = ChainInit::from_given_x;
    CHECK_THROWS_AS(given.validate(), SpecError);
    ModelAdaConfig negative;
    negative.rate = -1.0;
    CHECK_THROWS_AS(negative.validate(), SpecError);
}

TEST_CASE("a diverging adaptation halves the rate once and then aborts") {
    const ParamNet net = init_net(small_spec(false), 1);
    ModelAdaConfig cfg;
    cfg.steps = 2;
    cfg.rate = 1e308;
    CHECK_THROWS_AS(model_ada(net, batch(8, 1), cfg, 0), DivergenceError);
    CHECK_THROWS_AS(model_ada(net, Matrix(0, 2), ModelAdaConfig{}, 0), DimensionError);
}
