/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/data/mask_words.hpp
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

#include <stdexcept>
#include <utility>
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/data/vocab.hpp"

namespace tth::data {

/// Maximal runs of identical non-unknown word indices, as [begin, end) spans.
inline std::vector<std::pair<int, int>> word_runs(const std::vector<int>& w) {
    std::vector<std::pair<int, int>> runs;
    const int T = static_cast<int>(w.size());
    int t = 0;
    while (t < T) {
        if (w[static_cast<std::size_t>(t)] == Vocab::kUnknownWord) {
            ++t;
            continue;
        }
        int e = t + 1;
        while (e < T && w[static_cast<std::size_t>(e)] == w[static_cast<std::size_t>(t)]) ++e;
        runs.emplace_back(t, e);
        t = e;
    }
    return runs;
}

/**
 * Replace exactly k uniformly chosen word runs with 'unknown' over their
 * whole frame span. Used as training augmentation so the word branch
 * tolerates out-of-vocabulary input.
 */
inline std::vector<int> mask_unknown_words(const std::vector<int>& w, int k, common::Rng& rng) {
    if (k < 1 || k > 3) throw std::invalid_argument("mask_unknown_words: k must be in [1,3]");
    const auto runs = word_runs(w);
    const int n = static_cast<int>(runs.size());
    if (n < k) throw std::invalid_argument("mask_unknown_words: fewer word runs than k");
    std::vector<int> order(runs.size());
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        const int j = i + rng.uniform_int(n - i);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<int> out = w;
    for (int i = 0; i < k; ++i) {
        const auto [b, e] = runs[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        for (int t = b; t < e; ++t) out[static_cast<std::size_t>(t)] = Vocab::kUnknownWord;
    }
    return out;
}

} // namespace tth::data
