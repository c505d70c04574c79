#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mita {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid network, chain, shift or scenario description.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Input shape does not match what an operation expects.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A non-finite value appeared in a forward or backward pass.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::ptrdiff_t layer)
        : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}

    /// Layer index where the value appeared; -1 refers to the network input.
    std::ptrdiff_t layer() const noexcept { return layer_; }

private:
    std::ptrdiff_t layer_;
};

/// Normalization statistics could not be computed.
class StatsError : public Error {
public:
    using Error::Error;
};

/// A Langevin chain produced a non-finite gradient or iterate.
class ChainError : public Error {
public:
    ChainError(const std::string& what, std::size_t step)
        : Error(what + " (chain step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Adaptation diverged even after the step-size retry.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed experiment configuration. The message carries the field path.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable or malformed file.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mita
