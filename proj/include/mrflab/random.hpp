/*
   Copyright 2026 The mrflab Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace mrflab {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Seeded xoshiro256** stream with hierarchical splitting.
 *
 * Every stream carries a 64-bit key. `split(tag)` derives a child key from
 * (key, tag) only, never from the generator position, so a split path such as
 * seed -> grid point -> draw -> time step always names the same stream no
 * matter how much randomness the parent has already consumed. Floating-point
 * conversions are done here rather than through <random> distributions so
 * the streams are identical across standard library implementations.
 */
class RandomSource {
public:
    using result_type = std::uint64_t;

    explicit RandomSource(std::uint64_t seed) noexcept : key_(seed)
    {
        std::uint64_t sm = seed;
        for (auto& word : s_) {
            word = splitmix64(sm);
        }
    }

    std::uint64_t key() const noexcept { return key_; }

    RandomSource split(std::uint64_t tag) const noexcept
    {
        std::uint64_t sm = key_ ^ (0xd1b54a32d192ed03ULL * (tag + 1));
        std::uint64_t child = splitmix64(sm);
        child ^= splitmix64(sm) >> 1;
        return RandomSource(child);
    }

    template <typename... Tags>
    RandomSource split(std::uint64_t tag, Tags... rest) const noexcept
        requires(sizeof...(Tags) > 0)
    {
        return split(tag).split(static_cast<std::uint64_t>(rest)...);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n) by rejection; n > 0.
    std::uint64_t below(std::uint64_t n) noexcept
    {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (one variate per call, the partner is discarded).
    double normal() noexcept
    {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t key_;
    std::array<std::uint64_t, 4> s_{};
};

} // namespace mrflab
