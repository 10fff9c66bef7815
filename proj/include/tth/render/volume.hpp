/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/render/volume.hpp
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

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "tth/face/raster.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::render {

inline constexpr int kVolumeWindow = 15;
inline constexpr int kVolumeRadius = 7;

/**
 * Conditional space-time volume: the landmark frames of a 15-frame window
 * centered at t, concatenated channel-wise in window order (t-7 ... t+7,
 * indices clamped to the sequence).
 */
struct Volume {
    nn::Tensor data; // H x W x (15 * C)

    void validate() const {
        if (data.rank() != 3) throw std::invalid_argument("Volume: rank-3 tensor required");
        if (data.dim(2) % kVolumeWindow != 0)
            throw std::invalid_argument("Volume: channels must be a multiple of 15");
        if (!data.all_finite()) throw std::invalid_argument("Volume: non-finite entries");
    }

    int height() const { return data.dim(0); }
    int width() const { return data.dim(1); }
    int channels() const { return data.dim(2); }
};

inline Volume build_volume(const std::vector<nn::Tensor>& images, int t) {
    if (images.empty()) throw std::invalid_argument("build_volume: empty frame sequence");
    const int T = static_cast<int>(images.size());
    if (t < 0 || t >= T) throw std::invalid_argument("build_volume: frame index out of range");
    const int H = images[0].dim(0), W = images[0].dim(1), C = images[0].dim(2);
    for (const auto& img : images)
        if (img.shape != std::vector<int>{H, W, C})
            throw std::invalid_argument("build_volume: frames must share one shape");

    Volume v;
    v.data = nn::Tensor::zeros({H, W, kVolumeWindow * C});
    for (int f = 0; f < kVolumeWindow; ++f) {
        const int src = std::clamp(t - kVolumeRadius + f, 0, T - 1);
        const nn::Tensor& img = images[static_cast<std::size_t>(src)];
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                for (int c = 0; c < C; ++c) v.data.at(y, x, f * C + c) = img.at(y, x, c);
    }
    return v;
}

inline Volume build_volume(const std::vector<face::LandmarkFrame>& frames, int t) {
    std::vector<nn::Tensor> images;
    images.reserve(frames.size());
    for (const auto& f : frames) images.push_back(f.image);
    return build_volume(images, t);
}

} // namespace tth::render
