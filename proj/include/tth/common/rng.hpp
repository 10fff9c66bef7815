/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/common/rng.hpp
 *
 * Copyright 2026 The tth authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace tth::common {

/**
 * Deterministic random source. One pipeline seed is split into per-stage
 * streams by name, and all value mappings (uniform, normal, integer) are
 * implemented here instead of via std distributions, whose output is
 * implementation-defined. Bit-identical sequences on every platform.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n), n >= 1. Lemire multiply-shift mapping.
    int uniform_int(int n) {
        const auto x = static_cast<unsigned __int128>(engine_());
        return static_cast<int>((x * static_cast<std::uint64_t>(n)) >> 64);
    }

    /// Standard normal via Box-Muller, spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // avoid log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 engine_; // raw output sequence is fixed by the standard
    bool has_spare_ = false;
    double spare_ = 0.0;
};

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : s) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ull;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Derive the seed for a named stage from the single pipeline seed.
constexpr std::uint64_t stage_seed(std::uint64_t pipeline_seed, std::string_view stage) {
    return splitmix64(pipeline_seed ^ fnv1a(stage));
}

inline Rng stage_rng(std::uint64_t pipeline_seed, std::string_view stage) {
    return Rng(stage_seed(pipeline_seed, stage));
}

/// Fisher-Yates shuffle driven by the deterministic generator.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace tth::common
