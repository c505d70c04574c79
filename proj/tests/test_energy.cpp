#include <doctest.h>

#include <cmath>

#include "mita/energy.hpp"
#include "mita/error.hpp"
#include "mita/random.hpp"

using namespace mita;

namespace {

/// Linear net on a 1-D input whose logits are W x + b, with W and b given.
ParamNet linear_net(const std::vector<double>& w, const std::vector<double>& b) {
    NetSpec s;
    s.input_dim = 1;
    s.num_classes = w.size();
    Vector p(static_cast<Eigen::Index>(2 * w.size()));
    for (std::size_t k = 0; k < w.size(); ++k) {
        p(static_cast<Eigen::Index>(k)) = w[k];
        p(static_cast<Eigen::Index>(w.size() + k)) = b[k];
    }
    return {s, p, {}};
}

Vector one(double v) { return Vector::Constant(1, v); }

} // namespace

TEST_CASE("energy of fixed logits") {
    // Zero weights make the logits equal to the bias.
    const ParamNet two = linear_net({0, 0}, {0, 0});
    CHECK(energy(EnergyModel(two), one(0.4)) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));

    const double c = 2.5;
    const ParamNet flat = linear_net({0, 0, 0, 0, 0}, {c, c, c, c, c});
    CHECK(energy(EnergyModel(flat), one(0.0)) == doctest::Approx(-c - std::log(5.0)).epsilon(1e-15));

    const ParamNet ramp = linear_net({0, 0, 0}, {1, 2, 3});
    const double expected = -std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
    CHECK(energy(EnergyModel(ramp), one(0.0)) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(energy(EnergyModel(ramp), one(0.0)) == doctest::Approx(-3.407606).epsilon(1e-6));
}

TEST_CASE("logsumexp is overflow safe") {
    Vector big(3);
    big << 1000.0, 1000.0, -1000.0;
    CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
    const Vector p = softmax(big);
    CHECK(p(0) == doctest::Approx(0.5));
    CHECK(p(2) == 0.0);
}

TEST_CASE("class energies") {
    const ParamNet ramp = linear_net({0, 0, 0}, {1, 2, 3});
    const EnergyModel m(ramp);
    CHECK(class_energy(m, one(0.0), 2) == -3.0);
    const ParamNet zero = linear_net({0, 0}, {0, 0});
    CHECK(class_energy(EnergyModel(zero), one(1.0), 0) == 0.0);
    CHECK_THROWS_AS(class_energy(m, one(0.0), 3), DimensionError);
    CHECK_THROWS_AS(class_energy(m, one(0.0), -1), DimensionError);
    const Vector ce = class_energies(m, one(0.0));
    CHECK(ce(0) == -1.0);
    CHECK(ce(1) == -2.0);
}

TEST_CASE("predictions") {
    const ParamNet zero = linear_net({0, 0}, {0, 0});
    const Prediction tie = predict(EnergyModel(zero), one(0.0));
    CHECK(tie.prob(0) == 0.5);
    CHECK(tie.prob(1) == 0.5);
    CHECK(tie.label == 0);

    const ParamNet ramp = linear_net({0, 0, 0}, {1, 2, 3});
    const EnergyModel m(ramp);
    const Prediction p = predict(m, one(0.0));
    CHECK(p.label == 2);
    CHECK(p.prob(0) == doctest::Approx(0.090031).epsilon(1e-5));
    CHECK(p.prob(1) == doctest::Approx(0.244728).epsilon(1e-5));
    CHECK(p.prob(2) == doctest::Approx(0.665241).epsilon(1e-5));
    CHECK(std::abs(p.prob.sum() - 1.0) < 1e-12);

    // p(y|x) = exp(E(x) - E(x, y))
    const double e = energy(m, one(0.0));
    const Vector ce = class_energies(m, one(0.0));
    for (Eigen::Index k = 0; k < 3; ++k) {
        CHECK(p.prob(k) == doctest::Approx(std::exp(e - ce(k))).epsilon(1e-14));
    }
    CHECK(argmax(Vector::Constant(4, 1.0)) == 0);
}

TEST_CASE("batch energies") {
    // E(x) = -x - ln 2 for the net with logits (x, x); x = i - ln 2 gives E = -i.
    const ParamNet net = linear_net({1, 1}, {0, 0});
    const EnergyModel m(net);
    Matrix x(3, 1);
    x << 1.0 - std::log(2.0), 2.0 - std::log(2.0), 3.0 - std::log(2.0);
    const BatchEnergy b = batch_energy(m, x);
    CHECK(b.energy(0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(b.energy(2) == doctest::Approx(-3.0).epsilon(1e-14));
    CHECK(b.mean == doctest::Approx(-2.0).epsilon(1e-14));

    CHECK(batch_energy(m, x.topRows(1)).mean == energy(m, Vector(x.row(0).transpose())));
    Matrix twice(6, 1);
    twice << x, x;
    CHECK(batch_energy(m, twice).mean == doctest::Approx(b.mean).epsilon(1e-15));
    CHECK_THROWS_AS(batch_energy(m, Matrix(0, 1)), DimensionError);
}

TEST_CASE("shifting every logit by c lowers the energy by c and keeps the prediction") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> w(4), b(4);
        for (int k = 0; k < 4; ++k) {
            w[k] = rng.uniform(-2, 2);
            b[k] = rng.uniform(-2, 2);
        }
        const double c = rng.uniform(-10, 10);
        std::vector<double> shifted = b;
        for (double& v : shifted) {
            v += c;
        }
        const ParamNet n0 = linear_net(w, b);
        const EnergyModel m0(n0);
        const ParamNet n1 = linear_net(w, shifted);
        const EnergyModel m1(n1);
        const Vector x = one(rng.uniform(-1, 1));
        CHECK(energy(m1, x) == doctest::Approx(energy(m0, x) - c).epsilon(1e-9));
        const Prediction p0 = predict(m0, x);
        const Prediction p1 = predict(m1, x);
        CHECK((p0.prob - p1.prob).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(p0.label == p1.label);

        // E(x) <= -max logit <= E(x, y) for every y.
        const Vector ce = class_energies(m0, x);
        CHECK(energy(m0, x) <= -(-ce).maxCoeff());
        for (Eigen::Index k = 0; k < 4; ++k) {
            CHECK(-(-ce).maxCoeff() <= ce(k));
        }
    }
}

TEST_CASE("energy model gradients match the input gradient of the net") {
    NetSpec s;
    s.input_dim = 3;
    s.hidden_dims = {5};
    s.num_classes = 3;
    const ParamNet net = init_net(s, 2);
    Matrix x = Matrix::Random(4, 3);
    const EnergyEval e = EnergyModel(net).evaluate(x);
    const InputGradient g = grad_input(net, x);
    CHECK((e.energy - g.energy).cwiseAbs().maxCoeff() == 0.0);
    CHECK((e.grad - g.grad).cwiseAbs().maxCoeff() == 0.0);
}
