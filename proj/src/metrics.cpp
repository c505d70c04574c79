#include "mita/metrics.hpp"

#include "mita/error.hpp"

namespace mita {

GroupAccuracy accuracy(std::span<const int> predictions, std::span<const int> labels,
                       std::span<const std::uint8_t> tags) {
    if (predictions.size() != labels.size() || predictions.size() != tags.size()) {
        throw DimensionError("accuracy: predictions, labels and tags differ in length");
    }
    std::size_t correct_a = 0;
    std::size_t correct_b = 0;
    GroupAccuracy out;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool hit = predictions[i] == labels[i];
        if (tags[i] == 0) {
            ++out.n_a;
            correct_a += hit ? 1 : 0;
        } else {
            ++out.n_b;
            correct_b += hit ? 1 : 0;
        }
    }
    auto pct = [](std::size_t c, std::size_t n) { return 100.0 * static_cast<double>(c) / static_cast<double>(n); };
    if (out.n_a > 0) out.a = pct(correct_a, out.n_a);
    if (out.n_b > 0) out.b = pct(correct_b, out.n_b);
    if (out.n_a + out.n_b > 0) out.all = pct(correct_a + correct_b, out.n_a + out.n_b);
    return out;
}

void ErrorGrid::set(const std::string& shift, int severity, double error) {
    if (!(error >= 0.0 && error <= 1.0)) {
        throw SpecError("error rate for " + shift + " must lie in [0, 1]");
    }
    errors_[shift][severity] = error;
}

std::optional<double> ErrorGrid::get(const std::string& shift, int severity) const {
    const auto c = errors_.find(shift);
    if (c == errors_.end()) {
        return std::nullopt;
    }
    const auto s = c->second.find(severity);
    if (s == c->second.end()) {
        return std::nullopt;
    }
    return s->second;
}

std::size_t ErrorGrid::size() const {
    std::size_t n = 0;
    for (const auto& [shift, row] : errors_) {
        n += row.size();
    }
    return n;
}

bool ErrorGrid::complete() const {
    if (errors_.empty()) {
        return false;
    }
    const auto& first = errors_.begin()->second;
    for (const auto& [shift, row] : errors_) {
        if (row.empty() || row.size() != first.size()) {
            return false;
        }
        auto a = row.begin();
        for (auto b = first.begin(); b != first.end(); ++a, ++b) {
            if (a->first != b->first) {
                return false;
            }
        }
    }
    return true;
}

double average_accuracy(const ErrorGrid& grid) {
    if (!grid.complete()) {
        throw SpecError("average accuracy needs a complete error grid");
    }
    double total = 0.0;
    for (const auto& [shift, row] : grid.entries()) {
        for (const auto& [severity, e] : row) {
            total += e;
        }
    }
    return 100.0 * (1.0 - total / static_cast<double>(grid.size()));
}

double mce(const ErrorGrid& f, const ErrorGrid& f0) {
    if (!f.complete() || !f0.complete()) {
        throw SpecError("mCE needs complete error grids");
    }
    if (f.entries().size() != f0.entries().size() || f.size() != f0.size()) {
        throw SpecError("mCE grids cover different shifts or severities");
    }
    double total = 0.0;
    for (const auto& [shift, row] : f.entries()) {
        const auto base = f0.entries().find(shift);
        if (base == f0.entries().end()) {
            throw SpecError("mCE baseline has no entries for " + shift);
        }
        double num = 0.0;
        double den = 0.0;
        for (const auto& [severity, e] : row) {
            const auto b = base->second.find(severity);
            if (b == base->second.end()) {
                throw SpecError("mCE baseline lacks " + shift + " severity " + std::to_string(severity));
            }
            num += e;
            den += b->second;
        }
        if (den == 0.0) {
            throw SpecError("mCE baseline has zero error on shift " + shift);
        }
        total += num / den;
    }
    return 100.0 * total / static_cast<double>(f.entries().size());
}

} // namespace mita
