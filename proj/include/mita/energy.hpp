#pragma once

#include <vector>

#include "mita/net.hpp"

namespace mita {

/// Energies of a batch of points and their input gradients.
struct EnergyEval {
    Vector energy; ///< one entry per row
    Matrix grad;   ///< row i holds dE/dx at row i
};

/// Anything a Langevin chain can descend. Implemented by EnergyModel and by
/// closed-form test surfaces.
class EnergySurface {
public:
    virtual ~EnergySurface() = default;
    virtual EnergyEval evaluate(const Matrix& x) const = 0;
};

/// A classifier read as an energy-based model over its inputs:
///
///   E(x, y) = -logits(x)[y]
///   E(x)    = -logsumexp_y logits(x)[y]
///
/// The unnormalized density is exp(-E(x)); its normalizer is never computed.
/// The model refers to the net; the net must outlive it.
class EnergyModel final : public EnergySurface {
public:
    explicit EnergyModel(const ParamNet& net, NormMode mode = NormMode::eval_running_stats)
        : net_(&net), mode_(mode) {}
    EnergyModel(ParamNet&&, NormMode = NormMode::eval_running_stats) = delete;

    const ParamNet& net() const noexcept { return *net_; }
    NormMode mode() const noexcept { return mode_; }

    EnergyEval evaluate(const Matrix& x) const override;

private:
    const ParamNet* net_;
    NormMode mode_;
};

/// Max-shifted log-sum-exp.
double logsumexp(const Vector& v);
Vector softmax(const Vector& v);
/// Index of the largest entry; ties go to the lowest index.
int argmax(const Vector& v);

double energy(const EnergyModel& m, const Vector& x);
/// Throws DimensionError when y is outside [0, K).
double class_energy(const EnergyModel& m, const Vector& x, int y);
/// E(x, y) for every class y.
Vector class_energies(const EnergyModel& m, const Vector& x);

struct Prediction {
    Vector prob;
    int label = 0;
};

Prediction predict(const EnergyModel& m, const Vector& x);

struct BatchPrediction {
    Matrix prob; ///< n x K
    std::vector<int> labels;
};

BatchPrediction predict(const EnergyModel& m, const Matrix& x);

struct BatchEnergy {
    Vector energy;
    double mean = 0.0;
};

/// Throws DimensionError on an empty batch.
BatchEnergy batch_energy(const EnergyModel& m, const Matrix& x);

} // namespace mita
