#pragma once

// Counter-based SplitMix64 streams. A stream is identified by (seed, index)
// so trajectory i of a dataset can be regenerated independently of the rest.

#include <cstdint>
#include <span>

namespace offirl {

inline constexpr std::uint64_t splitmix_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix_mix(seed + 0x9e3779b97f4a7c15ULL * (index + 1)) ^ splitmix_mix(index ^ 0xd1b54a32d192ed03ULL);
}

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}
    SplitMix64(std::uint64_t seed, std::uint64_t stream) : state_(derive_seed(seed, stream)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix_mix(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    int below(int n) { return static_cast<int>(uniform() * n); }

    /// Draws an index from a (possibly slightly unnormalized) probability vector.
    /// Rounding slack falls on the last index with positive mass.
    int categorical(std::span<const double> probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        const double u = uniform() * total;
        double acc = 0.0;
        int last = -1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            acc += probs[i];
            last = static_cast<int>(i);
            if (u < acc) return last;
        }
        return last < 0 ? 0 : last;
    }

private:
    std::uint64_t state_;
};

}  // namespace offirl
