#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mita/energy.hpp"
#include "mita/random.hpp"

namespace mita {

enum class NoiseScale { sqrt_alpha, zero };
enum class ChainInit { from_noise_p0, from_given_x };

std::string to_string(NoiseScale n);
std::string to_string(ChainInit i);
NoiseScale noise_scale_from_string(const std::string& s);
ChainInit chain_init_from_string(const std::string& s);

/// Axis-aligned box with the same bounds on every coordinate.
struct Box {
    double lo = -1.0;
    double hi = 1.0;

    bool operator==(const Box&) const = default;
};

/// Langevin chain settings. One step is
///
///   x' = clamp(x - (alpha / 2) * clip(dE/dx) + s * eps),  eps ~ N(0, I)
///
/// with s = sqrt(alpha) for noisy chains and s = 0 for plain descent.
struct ChainConfig {
    double step_size = 1.0; ///< alpha
    std::size_t steps = 20; ///< T
    NoiseScale noise = NoiseScale::sqrt_alpha;
    ChainInit init = ChainInit::from_noise_p0;
    std::optional<Box> clamp_box = Box{};
    /// Per-sample gradient norm limit.
    std::optional<double> grad_clip = 10.0;
    /// Support of the uniform initial distribution p0.
    Box p0_box = Box{};

    /// Throws SpecError on a non-positive step with steps > 0, an empty box or
    /// a non-positive clip.
    void validate() const;

    bool operator==(const ChainConfig&) const = default;
};

struct ChainState {
    Matrix x;
    std::size_t step_index = 0;
    std::vector<double> energy_trace;    ///< mean energy at x_0 .. x_step_index
    std::vector<double> grad_norm_trace; ///< mean per-sample |dE/dx| at the same iterates
};

/// n i.i.d. points uniform over `box`, filled row-major from Rng(seed).
Matrix sample_p0(std::size_t dim, std::size_t n, std::uint64_t seed, Box box = {});

/// Row i of a chain batch draws its noise from Rng(chain_stream_seed(seed, i)).
std::uint64_t chain_stream_seed(std::uint64_t seed, std::size_t row) noexcept;

/// Seed of the p0 draw of a chain started from noise.
std::uint64_t chain_init_seed(std::uint64_t seed) noexcept;

struct StepResult {
    Matrix x;
    Vector energy;         ///< energies at the input iterate
    double grad_norm = 0;  ///< mean per-sample gradient norm before clipping
};

/// One Langevin step. `row_rngs` supplies one generator per row and is only
/// read when the chain is noisy. Throws ChainError on a non-finite gradient.
StepResult sgld_step(const EnergySurface& m, const Matrix& x, const ChainConfig& cfg, std::span<Rng> row_rngs,
                     std::size_t step_index = 0);

/// Runs `cfg.steps` Langevin steps. With from_given_x the chain starts at
/// `x0` (required). With from_noise_p0 the start is sample_p0 under
/// chain_init_seed(seed), shaped like `x0` when given and as `n` x `dim`
/// otherwise.
ChainState run_chain(const EnergySurface& m, const ChainConfig& cfg, std::uint64_t seed,
                     const std::optional<Matrix>& x0 = std::nullopt, std::size_t dim = 0, std::size_t n = 0);

/// CSV with header "step,mean_energy,grad_norm".
void write_chain_trace_csv(std::ostream& os, const ChainState& state);

} // namespace mita
