/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/pipeline/speaker.hpp
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
#include <cmath>
#include <stdexcept>

#include "tth/nn/tensor.hpp"
#include "tth/render/losses.hpp"

namespace tth::pipeline {

/// Fixed affine articulation style of the synthetic speaker; the style map
/// must rediscover this transform from fitted frames.
inline constexpr double kSpeakerStyleScale = 0.85;
inline constexpr double kSpeakerStyleOffset = 0.05;

inline nn::Tensor speaker_style(const nn::Tensor& m_mou) {
    nn::Tensor out = m_mou;
    for (double& v : out.data)
        v = std::clamp(kSpeakerStyleScale * v + kSpeakerStyleOffset, 0.0, 1.0);
    return out;
}

/// Axis-aligned pixel box around landmark rows [lo, hi), grown by a margin
/// and clamped to the image.
inline render::CropBox points_box(const nn::Tensor& points, int lo, int hi, int margin, int H,
                                  int W) {
    if (points.rank() != 2 || points.cols() != 2 || lo < 0 || hi > points.rows() || lo >= hi)
        throw std::invalid_argument("points_box: bad landmark range");
    double x0 = points.at(lo, 0), x1 = x0, y0 = points.at(lo, 1), y1 = y0;
    for (int i = lo; i < hi; ++i) {
        x0 = std::min(x0, points.at(i, 0));
        x1 = std::max(x1, points.at(i, 0));
        y0 = std::min(y0, points.at(i, 1));
        y1 = std::max(y1, points.at(i, 1));
    }
    int bx0 = std::clamp(static_cast<int>(std::floor(x0)) - margin, 0, W - 1);
    int by0 = std::clamp(static_cast<int>(std::floor(y0)) - margin, 0, H - 1);
    int bx1 = std::clamp(static_cast<int>(std::ceil(x1)) + margin, bx0 + 1, W);
    int by1 = std::clamp(static_cast<int>(std::ceil(y1)) + margin, by0 + 1, H);
    return render::CropBox{by0, bx0, by1 - by0, bx1 - bx0};
}

namespace detail {

struct Blob {
    double cx = 0.0, cy = 0.0, rx = 1.0, ry = 1.0;
};

inline Blob points_blob(const nn::Tensor& points, int lo, int hi, double grow) {
    Blob b;
    for (int i = lo; i < hi; ++i) {
        b.cx += points.at(i, 0);
        b.cy += points.at(i, 1);
    }
    b.cx /= hi - lo;
    b.cy /= hi - lo;
    double sx = 0.0, sy = 0.0;
    for (int i = lo; i < hi; ++i) {
        sx = std::max(sx, std::abs(points.at(i, 0) - b.cx));
        sy = std::max(sy, std::abs(points.at(i, 1) - b.cy));
    }
    b.rx = std::max(1.0, sx + grow);
    b.ry = std::max(1.0, sy + grow);
    return b;
}

/// 1 inside the ellipse, 0 outside, one normalized-radius unit of feather.
inline double blob_alpha(const Blob& b, double x, double y) {
    const double dx = (x - b.cx) / b.rx, dy = (y - b.cy) / b.ry;
    const double d = std::sqrt(dx * dx + dy * dy);
    return std::clamp(2.0 - 2.0 * d, 0.0, 1.0);
}

} // namespace detail

/**
 * Procedural photo stand-in for one speaker frame: a static background
 * gradient, a feathered skin disk under the landmark cloud, and dark
 * eye/mouth blobs that track the landmarks. Pure in (points, H, W), so a
 * renderer conditioned on rasterized landmarks can fit it exactly.
 */
inline nn::Tensor speaker_target(const nn::Tensor& points, int H, int W) {
    if (points.shape != std::vector<int>{68, 2})
        throw std::invalid_argument("speaker_target: 68 x 2 landmarks required");
    if (H < 16 || W < 16) throw std::invalid_argument("speaker_target: image too small");
    if (!points.all_finite()) throw std::invalid_argument("speaker_target: non-finite landmarks");

    const detail::Blob face = detail::points_blob(points, 0, 68, 3.0);
    const detail::Blob left_eye = detail::points_blob(points, 36, 42, 1.0);
    const detail::Blob right_eye = detail::points_blob(points, 42, 48, 1.0);
    const detail::Blob mouth = detail::points_blob(points, 48, 68, 1.0);

    nn::Tensor img = nn::Tensor::zeros({H, W, 3});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double u = static_cast<double>(x) / (W - 1);
            const double v = static_cast<double>(y) / (H - 1);
            double r = 0.10 + 0.25 * u;
            double g = 0.15 + 0.20 * v;
            double b = 0.35 - 0.10 * u;

            const double fa = detail::blob_alpha(face, x, y);
            if (fa > 0.0) {
                const double dx = (x - face.cx) / face.rx, dy = (y - face.cy) / face.ry;
                const double shade = 1.0 - 0.25 * std::sqrt(dx * dx + dy * dy);
                r = r + fa * (0.80 * shade - r);
                g = g + fa * (0.62 * shade - g);
                b = b + fa * (0.50 * shade - b);
            }
            for (const detail::Blob* eye : {&left_eye, &right_eye}) {
                const double ea = detail::blob_alpha(*eye, x, y);
                if (ea > 0.0) {
                    r += ea * (0.08 - r);
                    g += ea * (0.10 - g);
                    b += ea * (0.16 - b);
                }
            }
            const double ma = detail::blob_alpha(mouth, x, y);
            if (ma > 0.0) {
                r += ma * (0.55 - r);
                g += ma * (0.12 - g);
                b += ma * (0.14 - b);
            }
            img.at(y, x, 0) = std::clamp(r, 0.0, 1.0);
            img.at(y, x, 1) = std::clamp(g, 0.0, 1.0);
            img.at(y, x, 2) = std::clamp(b, 0.0, 1.0);
        }
    return img;
}

} // namespace tth::pipeline
