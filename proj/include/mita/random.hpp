#pragma once

#include <cstdint>
#include <random>

namespace mita {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of stream `stream` under `seed`. Distinct streams give unrelated
/// generators; equal arguments always give the same seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Deterministic generator with a fully documented output sequence so that
/// tests can replay draws on any platform:
///
///  - engine:   std::mt19937_64 seeded with the given value
///  - uniform01: (engine() >> 11) * 2^-53, in [0, 1)
///  - normal:   Box-Muller, u1 = 1 - uniform01(), u2 = uniform01(),
///              sqrt(-2 ln u1) * cos(2 pi u2); one normal consumes two
///              uniforms and nothing is cached.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    double normal();
    /// Uniform integer in [0, n). Requires n > 0.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by Rng::below, so the permutation is portable.
template <class Container>
void shuffle(Container& c, Rng& rng) {
    using std::swap;
    for (std::size_t i = c.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        swap(c[i - 1], c[j]);
    }
}

} // namespace mita
