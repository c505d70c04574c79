#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace mita {

/// Accuracy percentages per distribution group. A group with no samples is
/// reported as std::nullopt.
struct GroupAccuracy {
    std::optional<double> a;
    std::optional<double> b;
    std::optional<double> all;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
};

/// Tags: 0 = distribution A, 1 = distribution B. Throws DimensionError when
/// the spans differ in length.
GroupAccuracy accuracy(std::span<const int> predictions, std::span<const int> labels,
                       std::span<const std::uint8_t> tags);

/// Top-1 error rates in [0, 1] keyed by shift name and severity. Keys are
/// ordered, so every reduction visits entries in the same order whatever the
/// insertion order was.
class ErrorGrid {
public:
    /// Throws SpecError for an error rate outside [0, 1].
    void set(const std::string& shift, int severity, double error);
    std::optional<double> get(const std::string& shift, int severity) const;

    const std::map<std::string, std::map<int, double>>& entries() const noexcept { return errors_; }
    bool empty() const noexcept { return errors_.empty(); }
    std::size_t size() const;

    /// Non-empty and every shift has the same severity set.
    bool complete() const;

    bool operator==(const ErrorGrid&) const = default;

private:
    std::map<std::string, std::map<int, double>> errors_;
};

/// 100 * (1 - mean error over all entries). Throws SpecError on an
/// incomplete grid.
double average_accuracy(const ErrorGrid& grid);

/// Mean corruption error of `f` against baseline `f0`:
///   (1/C) sum_c [sum_s E_{c,s}(f) / sum_s E_{c,s}(f0)] * 100.
/// Both grids must cover the same (shift, severity) keys. Throws SpecError
/// when a baseline shift has zero total error.
double mce(const ErrorGrid& f, const ErrorGrid& f0);

} // namespace mita
