#include "mita/energy.hpp"

#include <cmath>
#include <string>

#include "mita/error.hpp"

namespace mita {

namespace {

void check_logits(const Vector& z) {
    if (!z.allFinite()) {
        throw NumericError("non-finite logits", -2);
    }
}

} // namespace

EnergyEval EnergyModel::evaluate(const Matrix& x) const {
    InputGradient g = grad_input(*net_, x, mode_);
    return {std::move(g.energy), std::move(g.grad)};
}

double logsumexp(const Vector& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

Vector softmax(const Vector& v) {
    const double lse = logsumexp(v);
    return (v.array() - lse).exp().matrix();
}

int argmax(const Vector& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

double energy(const EnergyModel& m, const Vector& x) {
    const Vector z = forward(m.net(), x, m.mode());
    check_logits(z);
    return -logsumexp(z);
}

double class_energy(const EnergyModel& m, const Vector& x, int y) {
    const auto k = static_cast<int>(m.net().spec().num_classes);
    if (y < 0 || y >= k) {
        throw DimensionError("class index " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
    }
    const Vector z = forward(m.net(), x, m.mode());
    check_logits(z);
    return -z(y);
}

Vector class_energies(const EnergyModel& m, const Vector& x) {
    const Vector z = forward(m.net(), x, m.mode());
    check_logits(z);
    return -z;
}

Prediction predict(const EnergyModel& m, const Vector& x) {
    const Vector z = forward(m.net(), x, m.mode());
    check_logits(z);
    return {softmax(z), argmax(z)};
}

BatchPrediction predict(const EnergyModel& m, const Matrix& x) {
    const Matrix z = forward(m.net(), x, m.mode());
    BatchPrediction out;
    out.prob.resize(z.rows(), z.cols());
    out.labels.reserve(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const Vector row = z.row(i).transpose();
        out.prob.row(i) = softmax(row).transpose();
        out.labels.push_back(argmax(row));
    }
    return out;
}

BatchEnergy batch_energy(const EnergyModel& m, const Matrix& x) {
    if (x.rows() == 0) {
        throw DimensionError("batch_energy on an empty batch");
    }
    const Matrix z = forward(m.net(), x, m.mode());
    BatchEnergy out;
    out.energy.resize(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        out.energy(i) = -logsumexp(z.row(i).transpose());
    }
    out.mean = out.energy.mean();
    return out;
}

} // namespace mita
