// Copyright 2026 The bigran Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>

namespace bigran {

/// Counter-based generator: the k-th output is a pure function of
/// (seed, stream, k), so traces are reproducible and substreams can be
/// forked without sharing state. The mixer is the splitmix64 finalizer.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ (mix(stream + 0x9e3779b97f4a7c15ull) | 1ull))) {}

    std::uint64_t next_u64() noexcept {
        counter_ += 0x9e3779b97f4a7c15ull;
        return mix(key_ ^ counter_);
    }

    /// Uniform in [0, 1).
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe as a log() argument.
    double next_double_open() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, n). n == 0 or 1 returns 0 without
    /// consuming entropy.
    std::uint64_t uniform_below(std::uint64_t n) noexcept {
        if (n <= 1) return 0;
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Standard normal via Box-Muller (second value cached).
    float gaussian() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_double_open();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = static_cast<float>(r * std::sin(a));
        have_spare_ = true;
        return static_cast<float>(r * std::cos(a));
    }

    /// Derives an independent substream; forking does not consume entropy.
    CounterRng fork(std::uint64_t stream) const noexcept {
        return CounterRng(key_, stream + 1);
    }

    static std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_{0};
    float spare_{0.0f};
    bool have_spare_{false};
};

} // namespace bigran
