#pragma once

#include <cstdint>
#include <initializer_list>

namespace cvxnmf {

/// Counter-based generator: the i-th output (i = 1, 2, ...) is
/// splitmix64_mix(key + i·0x9E3779B97F4A7C15). This is exactly SplitMix64
/// seeded with `key`, so streams are reproducible on any platform and any
/// output can be recomputed from (key, i) alone.
class CounterRng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Sub-stream key for a path of indices, e.g. derive(seed, {grid, trial}).
    static constexpr std::uint64_t derive(std::uint64_t seed,
                                          std::initializer_list<std::uint64_t> path) noexcept {
        std::uint64_t k = mix(seed + kGamma);
        for (std::uint64_t p : path) k = mix(k ^ mix((p + 1) * kGamma + 0xD1B54A32D192ED03ULL));
        return k;
    }

    std::uint64_t operator()() noexcept { return mix(key_ + (++counter_) * kGamma); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), bound > 0, by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = (*this)();
            if (r >= threshold) return r % bound;
        }
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace cvxnmf
