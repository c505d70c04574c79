#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mita/net.hpp"

namespace mita {

enum class SourceGenerator { blobs, moons };

std::string to_string(SourceGenerator g);
SourceGenerator source_generator_from_string(const std::string& s);

/// Labeled source world. For blobs, empty `means` places class k at radius
/// `radius` and angle 2 pi k / K in the first two coordinates (d >= 2), or
/// draws means uniformly in [-radius, radius]^d when d > 2 and
/// `spread_means` is set. Empty `covariances` means stddev^2 * I. Moons
/// requires K = 2 and d = 2.
struct SourceSpec {
    std::size_t num_classes = 4;
    std::size_t dim = 2;
    SourceGenerator generator = SourceGenerator::blobs;
    std::vector<Vector> means;
    std::vector<Matrix> covariances;
    double radius = 0.5;
    double stddev = 0.12;
    bool spread_means = false;
    std::size_t n_train_per_class = 250;
    std::size_t n_test_per_class = 500;
    std::uint64_t seed = 0;

    /// Throws SpecError on coincident means, wrong shapes or a covariance
    /// that is not positive definite.
    void validate() const;
    bool operator==(const SourceSpec&) const = default;
};

/// Samples with labels and per-sample distribution tags (0 = A, 1 = B).
struct LabeledBatch {
    Matrix x;
    std::vector<int> labels;
    std::vector<std::uint8_t> tags;
    std::size_t num_classes = 2;

    std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
    /// Throws DimensionError when the row counts disagree or a label is out of range.
    void validate() const;
    bool operator==(const LabeledBatch&) const = default;
};

struct SourceData {
    LabeledBatch train;
    LabeledBatch test;
};

/// Class means actually used by gen_source.
std::vector<Vector> resolved_means(const SourceSpec& spec);

/// Train and clean test sets drawn from independent streams of spec.seed.
SourceData gen_source(const SourceSpec& spec);

enum class ShiftKind { rotate, translate, gaussian_noise, feature_scale, blur_1d };

std::string to_string(ShiftKind k);
ShiftKind shift_kind_from_string(const std::string& s);

/// Severity-graded synthetic shift. Magnitudes per severity 1..5:
///
///   rotate          angle (deg) 8, 16, 24, 32, 40, applied to every
///                   coordinate pair (0,1), (2,3), ...
///   translate       distance 0.1, 0.2, 0.3, 0.4, 0.5 along (1,...,1)/sqrt(d)
///   gaussian_noise  stddev 0.1, 0.2, 0.3, 0.4, 0.5
///   feature_scale   s = 1.2, 1.4, 1.7, 2.0, 2.4; even coordinates times s,
///                   odd coordinates divided by s
///   blur_1d         lambda = 0.1, 0.2, 0.3, 0.4, 0.45;
///                   x_j <- (1 - lambda) x_j + lambda (x_{j-1} + x_{j+1}) / 2,
///                   circular over coordinates
///
/// Severity 0 is the identity.
struct ShiftSpec {
    ShiftKind kind = ShiftKind::gaussian_noise;
    int severity = 1;

    void validate() const;
    /// e.g. "gaussian_noise-3"
    std::string name() const;
    bool operator==(const ShiftSpec&) const = default;
};

double shift_magnitude(ShiftKind kind, int severity);

/// Deterministic given the seed; only gaussian_noise consumes randomness.
Matrix apply_shift(const Matrix& x, const ShiftSpec& shift, std::uint64_t seed);

enum class Regime { pure, mixture };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// A test stream: `num_batches` disjoint batches of `batch_size` clean test
/// samples, a fraction `ratio` shifted by dist_a and the rest by dist_b.
struct ScenarioSpec {
    std::string name;
    Regime regime = Regime::pure;
    ShiftSpec dist_a;
    std::optional<ShiftSpec> dist_b;
    double ratio = 1.0;
    std::size_t batch_size = 200;
    std::size_t num_batches = 5;
    std::uint64_t seed = 0;

    void validate() const;
    /// Hex digest of every field except the name.
    std::string fingerprint() const;
    bool operator==(const ScenarioSpec&) const = default;
};

/// max(1, round(ratio * batch_size)).
std::size_t outlier_count(double ratio, std::size_t batch_size);

/// Throws SpecError when the clean set holds fewer than
/// batch_size * num_batches samples. Rows are drawn by a seeded permutation,
/// the first n_A of each batch go to dist_a, and the batch is then shuffled.
std::vector<LabeledBatch> compose_batches(const ScenarioSpec& spec, const LabeledBatch& clean);

/// Named (dist_a, dist_b) shift pairs: "category_distinct"
/// (gaussian_noise-3, rotate-3) and "category_similar" (gaussian_noise-3,
/// gaussian_noise-4).
std::pair<ShiftSpec, ShiftSpec> shift_pair_preset(const std::string& name);

/// Dataset layout, little-endian:
///   "MITADAT1", u64 n, u64 d, u64 K,
///   f64 x[n * d] row-major, i32 labels[n], u8 tags[n]
void write_dataset(std::ostream& os, const LabeledBatch& data);
LabeledBatch read_dataset(std::istream& is);
void save_dataset(const std::string& path, const LabeledBatch& data);
LabeledBatch load_dataset(const std::string& path);
/// Header "x0,...,x{d-1},label,tag".
void write_dataset_csv(std::ostream& os, const LabeledBatch& data);

} // namespace mita
