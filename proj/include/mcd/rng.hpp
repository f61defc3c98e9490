#pragma once

// Counter-based random stream built on Philox4x32-10 (Salmon et al.,
// "Parallel random numbers: as easy as 1, 2, 3"). Block i of a stream with
// 64-bit seed S is philox(counter = {lo(i), hi(i), 0, 0}, key = {lo(S), hi(S)}).
// Each block yields two 64-bit outputs (w0 | w1 << 32, w2 | w3 << 32).
//
// Derived conversions, fixed for reproducibility across implementations:
//   uniform01  = (u64 >> 11) * 2^-53                      in [0, 1)
//   index(n)   = Lemire multiply-shift with rejection     in [0, n)
//   normal     = Box-Muller on (1 - uniform01, uniform01), cos branch first,
//                sin branch cached for the next call.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace mcd {

using Philox4x32Ctr = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Ctr philox4x32_10(Philox4x32Ctr ctr, Philox4x32Key key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kW0;
            key[1] += kW1;
        }
        const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Seed of the independent sub-stream `index` under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    const Philox4x32Ctr out = philox4x32_10(
        {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5EEDu, 0u},
        {static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)});
    return std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32);
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64() {
        if (lane_ == 2) refill();
        return buffer_[lane_++];
    }

    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t index(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    std::uint64_t block() const { return block_; }

private:
    void refill() {
        const Philox4x32Ctr out = philox4x32_10(
            {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32), 0u, 0u}, key_);
        buffer_[0] = std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32);
        buffer_[1] = std::uint64_t{out[2]} | (std::uint64_t{out[3]} << 32);
        ++block_;
        lane_ = 0;
    }

    Philox4x32Key key_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int lane_ = 2;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mcd
