/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/pipeline/watermark.hpp
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

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "tth/nn/tensor.hpp"

namespace tth::pipeline {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;

/// 5x7 bitmap rows (top first, bit 4 = leftmost column) for one letter.
inline std::array<std::uint8_t, 7> glyph_rows(char c) {
    switch (c) {
        case 'S': return {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E};
        case 'Y': return {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04};
        case 'N': return {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11};
        case 'T': return {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04};
        case 'H': return {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11};
        case 'E': return {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F};
        case 'I': return {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x1F};
        case 'C': return {0x0F, 0x10, 0x10, 0x10, 0x10, 0x10, 0x0F};
        default: throw std::invalid_argument(std::string("glyph_rows: no glyph for '") + c + "'");
    }
}

/**
 * Stamps white 5x7 text on a black backing strip in the bottom-left corner
 * of an H x W x 3 image in [0, 1]. Marks generated frames as synthetic.
 */
inline void stamp_watermark(nn::Tensor& img, const std::string& text = "SYNTHETIC") {
    if (img.rank() != 3 || img.dim(2) != 3)
        throw std::invalid_argument("stamp_watermark: H x W x 3 image required");
    if (text.empty()) throw std::invalid_argument("stamp_watermark: empty text");
    const int H = img.dim(0), W = img.dim(1);
    const int tw = static_cast<int>(text.size()) * (kGlyphWidth + 1) - 1;
    const int x0 = 2, y0 = H - kGlyphHeight - 2;
    if (y0 < 1 || x0 + tw + 1 > W)
        throw std::invalid_argument("stamp_watermark: image too small for the text");

    for (int y = y0 - 1; y <= y0 + kGlyphHeight; ++y)
        for (int x = x0 - 1; x <= x0 + tw; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 0.0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto rows = glyph_rows(text[i]);
        const int gx = x0 + static_cast<int>(i) * (kGlyphWidth + 1);
        for (int r = 0; r < kGlyphHeight; ++r)
            for (int b = 0; b < kGlyphWidth; ++b)
                if (rows[static_cast<std::size_t>(r)] >> (kGlyphWidth - 1 - b) & 1)
                    for (int c = 0; c < 3; ++c) img.at(y0 + r, gx + b, c) = 1.0;
    }
}

} // namespace tth::pipeline
