#pragma once

#include <cstdint>
#include <limits>

namespace sparse_eb {

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace detail

/// Counter-based generator keyed by (seed, stream, substream).
///
/// The n-th output is a pure function of the key and n, so any task can
/// reconstruct its own stream without coordinating with other tasks. Streams
/// are typically (replication index, coordinate index). Satisfies
/// UniformRandomBitGenerator so the <random> distributions can consume it.
class CounterRng {
public:
    using result_type = std::uint64_t;

    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0,
                         std::uint64_t substream = 0) noexcept
        : key_(derive_key(seed, stream, substream)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    constexpr result_type operator()() noexcept { return at(counter_++); }

    /// Output at an absolute position, independent of the running counter.
    constexpr result_type at(std::uint64_t position) const noexcept {
        return detail::mix64(key_ + (position + 1) * detail::kGolden);
    }

    /// Uniform double in the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream,
                                              std::uint64_t substream) noexcept {
        std::uint64_t k = detail::mix64(seed + detail::kGolden);
        k = detail::mix64(k ^ (stream + 0x632be59bd9b4e019ULL));
        k = detail::mix64(k ^ (substream + 0x85157af5ULL * detail::kGolden));
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace sparse_eb
