/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/io/png.hpp
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

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tth/nn/tensor.hpp"

namespace tth::io {

/**
 * Minimal RGB8 PNG writer. Filter 0 on every scanline and a fixed zlib
 * level, so the same pixels always produce the same bytes.
 */
class PngWriter {
public:
    static constexpr int kZlibLevel = 6;

    /// Image values in [0, 1], shape H x W x 3; values are clamped.
    static void write(const std::filesystem::path& path, const nn::Tensor& img) {
        if (img.rank() != 3 || img.dim(2) != 3)
            throw std::invalid_argument("PngWriter: H x W x 3 tensor required");
        const int H = img.dim(0), W = img.dim(1);
        std::vector<std::uint8_t> raw;
        raw.reserve(static_cast<std::size_t>(H) * (1 + static_cast<std::size_t>(W) * 3));
        for (int y = 0; y < H; ++y) {
            raw.push_back(0); // filter type None
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < 3; ++c) raw.push_back(to_byte(img.at(y, x, c)));
        }
        write_rgb8(path, W, H, raw);
    }

    static std::uint8_t to_byte(double v) {
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        return static_cast<std::uint8_t>(std::lround(v * 255.0));
    }

private:
    static void write_rgb8(const std::filesystem::path& path, int W, int H,
                           const std::vector<std::uint8_t>& filtered) {
        std::vector<std::uint8_t> compressed(compressBound(static_cast<uLong>(filtered.size())));
        uLongf clen = static_cast<uLongf>(compressed.size());
        const int rc = compress2(compressed.data(), &clen, filtered.data(),
                                 static_cast<uLong>(filtered.size()), kZlibLevel);
        if (rc != Z_OK) throw std::runtime_error("PngWriter: zlib compress failed");
        compressed.resize(clen);

        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("PngWriter: cannot open " + path.string());
        static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
        f.write(reinterpret_cast<const char*>(sig), 8);

        std::vector<std::uint8_t> ihdr;
        push_u32(ihdr, static_cast<std::uint32_t>(W));
        push_u32(ihdr, static_cast<std::uint32_t>(H));
        ihdr.push_back(8);  // bit depth
        ihdr.push_back(2);  // color type RGB
        ihdr.push_back(0);  // compression
        ihdr.push_back(0);  // filter
        ihdr.push_back(0);  // interlace
        write_chunk(f, "IHDR", ihdr);
        write_chunk(f, "IDAT", compressed);
        write_chunk(f, "IEND", {});
        if (!f) throw std::runtime_error("PngWriter: write failed " + path.string());
    }

    static void push_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
        v.push_back(static_cast<std::uint8_t>(x >> 24));
        v.push_back(static_cast<std::uint8_t>(x >> 16));
        v.push_back(static_cast<std::uint8_t>(x >> 8));
        v.push_back(static_cast<std::uint8_t>(x));
    }

    static void write_chunk(std::ofstream& f, const char* type, const std::vector<std::uint8_t>& data) {
        std::uint8_t len[4] = {static_cast<std::uint8_t>(data.size() >> 24),
                               static_cast<std::uint8_t>(data.size() >> 16),
                               static_cast<std::uint8_t>(data.size() >> 8),
                               static_cast<std::uint8_t>(data.size())};
        f.write(reinterpret_cast<const char*>(len), 4);
        f.write(type, 4);
        if (!data.empty()) f.write(reinterpret_cast<const char*>(data.data()),
                                   static_cast<std::streamsize>(data.size()));
        uLong crc = crc32(0L, Z_NULL, 0);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
        if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
        std::uint8_t cb[4] = {static_cast<std::uint8_t>(crc >> 24), static_cast<std::uint8_t>(crc >> 16),
                              static_cast<std::uint8_t>(crc >> 8), static_cast<std::uint8_t>(crc)};
        f.write(reinterpret_cast<const char*>(cb), 4);
    }
};

} // namespace tth::io
