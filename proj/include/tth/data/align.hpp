/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/data/align.hpp
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
#include <vector>

namespace tth::data {

struct AlignSegment {
    int symbol = 0;
    double start_sec = 0.0;
    double end_sec = 0.0;
};

/**
 * Frame alignment by the midpoint rule: frame t takes the symbol whose
 * interval [start, end) contains (t + 0.5) / fps; frames in gaps take
 * `fill_symbol` (silence for phonemes, unknown for words).
 */
inline std::vector<int> align_to_frames(const std::vector<AlignSegment>& segments, int fps, int T,
                                        int fill_symbol) {
    if (fps <= 0 || T < 1) throw std::invalid_argument("align_to_frames: fps and T must be positive");
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (s.start_sec < 0.0 || s.end_sec < s.start_sec)
            throw std::invalid_argument("align_to_frames: negative or reversed segment times");
        if (i > 0 && s.start_sec < segments[i - 1].end_sec)
            throw std::invalid_argument("align_to_frames: overlapping or unsorted segments");
    }
    std::vector<int> out(static_cast<std::size_t>(T), fill_symbol);
    std::size_t cursor = 0;
    for (int t = 0; t < T; ++t) {
        const double mid = (t + 0.5) / fps;
        while (cursor < segments.size() && segments[cursor].end_sec <= mid) ++cursor;
        if (cursor < segments.size() && segments[cursor].start_sec <= mid)
            out[static_cast<std::size_t>(t)] = segments[cursor].symbol;
    }
    return out;
}

} // namespace tth::data
