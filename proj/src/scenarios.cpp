#include "mita/scenarios.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "mita/error.hpp"
#include "mita/random.hpp"

namespace mita {

namespace {

constexpr std::array<double, 5> kRotateDegrees{8, 16, 24, 32, 40};
constexpr std::array<double, 5> kTranslate{0.1, 0.2, 0.3, 0.4, 0.5};
constexpr std::array<double, 5> kNoiseStd{0.1, 0.2, 0.3, 0.4, 0.5};
constexpr std::array<double, 5> kScale{1.2, 1.4, 1.7, 2.0, 2.4};
constexpr std::array<double, 5> kBlur{0.1, 0.2, 0.3, 0.4, 0.45};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Matrix cholesky_factor(const Matrix& cov, std::size_t k) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        throw SpecError("degenerate covariance for class " + std::to_string(k));
    }
    return llt.matrixL();
}

LabeledBatch draw_blobs(const SourceSpec& spec, const std::vector<Vector>& means, std::size_t per_class, Rng& rng) {
    const auto d = static_cast<Eigen::Index>(spec.dim);
    LabeledBatch out;
    out.num_classes = spec.num_classes;
    out.x.resize(static_cast<Eigen::Index>(per_class * spec.num_classes), d);
    Eigen::Index row = 0;
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        const Matrix factor = spec.covariances.empty()
                                  ? Matrix(spec.stddev * Matrix::Identity(d, d))
                                  : cholesky_factor(spec.covariances[k], k);
        for (std::size_t i = 0; i < per_class; ++i, ++row) {
            Vector z(d);
            for (auto& v : z) {
                v = rng.normal();
            }
            out.x.row(row) = (means[k] + factor * z).transpose();
            out.labels.push_back(static_cast<int>(k));
        }
    }
    out.tags.assign(out.labels.size(), 0);
    return out;
}

LabeledBatch draw_moons(const SourceSpec& spec, std::size_t per_class, Rng& rng) {
    LabeledBatch out;
    out.num_classes = 2;
    out.x.resize(static_cast<Eigen::Index>(2 * per_class), 2);
    Eigen::Index row = 0;
    for (int k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < per_class; ++i, ++row) {
            const double t = rng.uniform(0.0, std::numbers::pi);
            double a = k == 0 ? std::cos(t) : 1.0 - std::cos(t);
            double b = k == 0 ? std::sin(t) : 0.5 - std::sin(t);
            a = (a - 0.5) * spec.radius + spec.stddev * rng.normal();
            b = (b - 0.25) * spec.radius + spec.stddev * rng.normal();
            out.x(row, 0) = a;
            out.x(row, 1) = b;
            out.labels.push_back(k);
        }
    }
    out.tags.assign(out.labels.size(), 0);
    return out;
}

LabeledBatch take_rows(const LabeledBatch& src, const std::vector<std::size_t>& rows) {
    LabeledBatch out;
    out.num_classes = src.num_classes;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), src.x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.x.row(static_cast<Eigen::Index>(i)) = src.x.row(static_cast<Eigen::Index>(rows[i]));
        out.labels.push_back(src.labels[rows[i]]);
        out.tags.push_back(src.tags.empty() ? 0 : src.tags[rows[i]]);
    }
    return out;
}

void check_severity(int severity) {
    if (severity < 0 || severity > 5) {
        throw SpecError("shift severity " + std::to_string(severity) + " outside 1..5");
    }
}

} // namespace

std::string to_string(SourceGenerator g) { return g == SourceGenerator::blobs ? "blobs" : "moons"; }

SourceGenerator source_generator_from_string(const std::string& s) {
    if (s == "blobs") return SourceGenerator::blobs;
    if (s == "moons") return SourceGenerator::moons;
    throw SpecError("unknown source generator '" + s + "'");
}

void SourceSpec::validate() const {
    if (num_classes < 2) {
        throw SpecError("source needs at least 2 classes");
    }
    if (dim == 0) {
        throw SpecError("source dimension must be positive");
    }
    if (!(stddev > 0.0) && covariances.empty()) {
        throw SpecError("source stddev must be positive");
    }
    if (generator == SourceGenerator::moons && (num_classes != 2 || dim != 2)) {
        throw SpecError("moons generator needs K = 2 and d = 2");
    }
    if (!means.empty() && means.size() != num_classes) {
        throw SpecError("need one mean per class");
    }
    for (const Vector& m : means) {
        if (static_cast<std::size_t>(m.size()) != dim) {
            throw SpecError("class mean has the wrong dimension");
        }
    }
    if (!covariances.empty()) {
        if (covariances.size() != num_classes) {
            throw SpecError("need one covariance per class");
        }
        for (std::size_t k = 0; k < covariances.size(); ++k) {
            const Matrix& c = covariances[k];
            if (static_cast<std::size_t>(c.rows()) != dim || static_cast<std::size_t>(c.cols()) != dim) {
                throw SpecError("covariance of class " + std::to_string(k) + " has the wrong shape");
            }
            if (!c.isApprox(c.transpose(), 1e-12)) {
                throw SpecError("covariance of class " + std::to_string(k) + " is not symmetric");
            }
            cholesky_factor(c, k);
        }
    }
    if (generator == SourceGenerator::blobs) {
        const auto m = resolved_means(*this);
        for (std::size_t a = 0; a < m.size(); ++a) {
            for (std::size_t b = a + 1; b < m.size(); ++b) {
                if ((m[a] - m[b]).norm() < 1e-9) {
                    throw SpecError("class means " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
                }
            }
        }
    }
}

std::vector<Vector> resolved_means(const SourceSpec& spec) {
    if (!spec.means.empty()) {
        return spec.means;
    }
    const auto d = static_cast<Eigen::Index>(spec.dim);
    std::vector<Vector> means;
    if (spec.dim > 2 && spec.spread_means) {
        Rng rng(derive_seed(spec.seed, 0));
        for (int attempt = 0; attempt < 1000 && means.size() < spec.num_classes; ++attempt) {
            Vector m(d);
            for (auto& v : m) {
                v = rng.uniform(-spec.radius, spec.radius);
            }
            bool far = true;
            for (const Vector& other : means) {
                far = far && (m - other).norm() >= spec.radius;
            }
            if (far) {
                means.push_back(std::move(m));
            }
        }
        if (means.size() < spec.num_classes) {
            throw SpecError("could not place well-separated class means");
        }
        return means;
    }
    for (std::size_t k = 0; k < spec.num_classes; ++k) {
        Vector m = Vector::Zero(d);
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.num_classes);
        m(0) = spec.radius * std::cos(angle);
        if (d > 1) {
            m(1) = spec.radius * std::sin(angle);
        }
        means.push_back(std::move(m));
    }
    return means;
}

SourceData gen_source(const SourceSpec& spec) {
    spec.validate();
    Rng train_rng(derive_seed(spec.seed, 1));
    Rng test_rng(derive_seed(spec.seed, 2));
    if (spec.generator == SourceGenerator::moons) {
        return {draw_moons(spec, spec.n_train_per_class, train_rng), draw_moons(spec, spec.n_test_per_class, test_rng)};
    }
    const auto means = resolved_means(spec);
    return {draw_blobs(spec, means, spec.n_train_per_class, train_rng),
            draw_blobs(spec, means, spec.n_test_per_class, test_rng)};
}

void LabeledBatch::validate() const {
    const auto n = static_cast<std::size_t>(x.rows());
    if (labels.size() != n || tags.size() != n) {
        throw DimensionError("labeled batch has mismatched row counts");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw DimensionError("label " + std::to_string(y) + " out of range");
        }
    }
}

std::string to_string(ShiftKind k) {
    switch (k) {
    case ShiftKind::rotate: return "rotate";
    case ShiftKind::translate: return "translate";
    case ShiftKind::gaussian_noise: return "gaussian_noise";
    case ShiftKind::feature_scale: return "feature_scale";
    case ShiftKind::blur_1d: return "blur_1d";
    }
    return "unknown";
}

ShiftKind shift_kind_from_string(const std::string& s) {
    for (ShiftKind k : {ShiftKind::rotate, ShiftKind::translate, ShiftKind::gaussian_noise, ShiftKind::feature_scale,
                        ShiftKind::blur_1d}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw SpecError("unknown shift kind '" + s + "'");
}

void ShiftSpec::validate() const {
    if (severity < 1 || severity > 5) {
        throw SpecError("shift severity " + std::to_string(severity) + " outside 1..5");
    }
}

std::string ShiftSpec::name() const { return to_string(kind) + "-" + std::to_string(severity); }

double shift_magnitude(ShiftKind kind, int severity) {
    check_severity(severity);
    if (severity == 0) {
        return kind == ShiftKind::feature_scale ? 1.0 : 0.0;
    }
    const auto i = static_cast<std::size_t>(severity - 1);
    switch (kind) {
    case ShiftKind::rotate: return kRotateDegrees[i];
    case ShiftKind::translate: return kTranslate[i];
    case ShiftKind::gaussian_noise: return kNoiseStd[i];
    case ShiftKind::feature_scale: return kScale[i];
    case ShiftKind::blur_1d: return kBlur[i];
    }
    throw SpecError("unknown shift kind");
}

Matrix apply_shift(const Matrix& x, const ShiftSpec& shift, std::uint64_t seed) {
    check_severity(shift.severity);
    if (shift.severity == 0) {
        return x;
    }
    const double m = shift_magnitude(shift.kind, shift.severity);
    const Eigen::Index d = x.cols();
    Matrix out = x;
    switch (shift.kind) {
    case ShiftKind::rotate: {
        const double a = m * std::numbers::pi / 180.0;
        const double c = std::cos(a);
        const double s = std::sin(a);
        for (Eigen::Index j = 0; j + 1 < d; j += 2) {
            out.col(j) = c * x.col(j) - s * x.col(j + 1);
            out.col(j + 1) = s * x.col(j) + c * x.col(j + 1);
        }
        break;
    }
    case ShiftKind::translate:
        out.array() += m / std::sqrt(static_cast<double>(d));
        break;
    case ShiftKind::gaussian_noise: {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                out(i, j) += m * rng.normal();
            }
        }
        break;
    }
    case ShiftKind::feature_scale:
        for (Eigen::Index j = 0; j < d; ++j) {
            out.col(j) *= (j % 2 == 0) ? m : 1.0 / m;
        }
        break;
    case ShiftKind::blur_1d:
        if (d > 1) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const Eigen::Index prev = (j + d - 1) % d;
                const Eigen::Index next = (j + 1) % d;
                out.col(j) = (1.0 - m) * x.col(j) + 0.5 * m * (x.col(prev) + x.col(next));
            }
        }
        break;
    }
    return out;
}

std::string to_string(Regime r) { return r == Regime::pure ? "pure" : "mixture"; }

Regime regime_from_string(const std::string& s) {
    if (s == "pure") return Regime::pure;
    if (s == "mixture") return Regime::mixture;
    throw SpecError("unknown regime '" + s + "'");
}

void ScenarioSpec::validate() const {
    dist_a.validate();
    if (batch_size == 0 || num_batches == 0) {
        throw SpecError("scenario '" + name + "' needs positive batch size and batch count");
    }
    if (regime == Regime::pure) {
        if (ratio != 1.0) {
            throw SpecError("pure scenario '" + name + "' must have ratio 1");
        }
        if (dist_b) {
            throw SpecError("pure scenario '" + name + "' takes no second distribution");
        }
    } else {
        if (!dist_b) {
            throw SpecError("mixture scenario '" + name + "' needs dist_b");
        }
        dist_b->validate();
        if (!(ratio > 0.0 && ratio < 1.0)) {
            throw SpecError("mixture scenario '" + name + "' needs 0 < ratio < 1");
        }
    }
}

std::string ScenarioSpec::fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    os << to_string(regime) << '|' << dist_a.name() << '|' << (dist_b ? dist_b->name() : "-") << '|' << ratio << '|'
       << batch_size << '|' << num_batches << '|' << seed;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
}

std::size_t outlier_count(double ratio, std::size_t batch_size) {
    const auto n = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(batch_size)));
    return std::min(batch_size, std::max<std::size_t>(1, n));
}

std::vector<LabeledBatch> compose_batches(const ScenarioSpec& spec, const LabeledBatch& clean) {
    spec.validate();
    clean.validate();
    const std::size_t needed = spec.batch_size * spec.num_batches;
    if (clean.size() < needed) {
        throw SpecError("scenario '" + spec.name + "' needs " + std::to_string(needed) + " clean samples, have " +
                        std::to_string(clean.size()));
    }
    std::vector<std::size_t> order(clean.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng pick(derive_seed(spec.seed, 0));
    shuffle(order, pick);

    const std::size_t n_a = spec.regime == Regime::pure ? spec.batch_size : outlier_count(spec.ratio, spec.batch_size);
    std::vector<LabeledBatch> batches;
    batches.reserve(spec.num_batches);
    for (std::size_t b = 0; b < spec.num_batches; ++b) {
        const auto first = order.begin() + static_cast<std::ptrdiff_t>(b * spec.batch_size);
        std::vector<std::size_t> rows(first, first + static_cast<std::ptrdiff_t>(spec.batch_size));
        LabeledBatch batch = take_rows(clean, rows);

        const auto na = static_cast<Eigen::Index>(n_a);
        const auto nb = static_cast<Eigen::Index>(spec.batch_size - n_a);
        batch.x.topRows(na) = apply_shift(batch.x.topRows(na), spec.dist_a, derive_seed(spec.seed, 1000 + 2 * b));
        if (nb > 0) {
            batch.x.bottomRows(nb) =
                apply_shift(batch.x.bottomRows(nb), *spec.dist_b, derive_seed(spec.seed, 1001 + 2 * b));
        }
        for (std::size_t i = 0; i < spec.batch_size; ++i) {
            batch.tags[i] = i < n_a ? 0 : 1;
        }

        std::vector<std::size_t> perm(spec.batch_size);
        for (std::size_t i = 0; i < perm.size(); ++i) {
            perm[i] = i;
        }
        Rng mix(derive_seed(spec.seed, 2000 + b));
        shuffle(perm, mix);
        batches.push_back(take_rows(batch, perm));
    }
    return batches;
}

std::pair<ShiftSpec, ShiftSpec> shift_pair_preset(const std::string& name) {
    if (name == "category_distinct") {
        return {{ShiftKind::gaussian_noise, 3}, {ShiftKind::rotate, 3}};
    }
    if (name == "category_similar") {
        return {{ShiftKind::gaussian_noise, 3}, {ShiftKind::gaussian_noise, 4}};
    }
    throw SpecError("unknown shift pair preset '" + name + "'");
}

} // namespace mita
