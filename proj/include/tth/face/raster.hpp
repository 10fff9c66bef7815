/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/face/raster.hpp
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
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "tth/face/model.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::face {

/// One rendered landmark image with the points that produced it.
struct LandmarkFrame {
    nn::Tensor image;  // H x W x 3 in [0, 1]
    nn::Tensor points; // 68 x 2
};

namespace detail {

struct Part {
    int begin;
    int end; // inclusive
    bool closed;
    std::array<double, 3> color;
};

/// Fixed 68-point topology and draw order. Jaw, brows and nose are open
/// polylines; eyes and lips close back to their first point.
inline const std::array<Part, 9>& landmark_parts() {
    static const std::array<Part, 9> parts{{
        {0, 16, false, {0.2, 1.0, 0.2}},  // jaw
        {17, 21, false, {1.0, 0.8, 0.2}}, // left brow
        {22, 26, false, {1.0, 0.8, 0.2}}, // right brow
        {27, 30, false, {0.4, 0.6, 1.0}}, // nose bridge
        {31, 35, false, {0.4, 0.6, 1.0}}, // nose base
        {36, 41, true, {0.2, 1.0, 1.0}},  // left eye
        {42, 47, true, {0.2, 1.0, 1.0}},  // right eye
        {48, 59, true, {1.0, 0.3, 0.3}},  // outer lip
        {60, 67, true, {1.0, 0.5, 0.7}},  // inner lip
    }};
    return parts;
}

inline void put_pixel(nn::Tensor& img, int x, int y, const std::array<double, 3>& c) {
    const int H = img.dim(0), W = img.dim(1);
    if (x < 0 || x >= W || y < 0 || y >= H) return;
    for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[static_cast<std::size_t>(ch)];
}

/// Liang-Barsky clip of a real-valued segment to the pixel rectangle so
/// wildly out-of-frame points cannot stretch the raster loop.
inline bool clip_segment(double& x0, double& y0, double& x1, double& y1, double W, double H) {
    double t0 = 0.0, t1 = 1.0;
    const double dx = x1 - x0, dy = y1 - y0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {x0 - 0.0, (W - 1.0) - x0, y0 - 0.0, (H - 1.0) - y0};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return false;
        } else {
            const double r = q[i] / p[i];
            if (p[i] < 0.0) {
                if (r > t1) return false;
                if (r > t0) t0 = r;
            } else {
                if (r < t0) return false;
                if (r < t1) t1 = r;
            }
        }
    }
    const double nx0 = x0 + t0 * dx, ny0 = y0 + t0 * dy;
    const double nx1 = x0 + t1 * dx, ny1 = y0 + t1 * dy;
    x0 = nx0;
    y0 = ny0;
    x1 = nx1;
    y1 = ny1;
    return true;
}

inline void draw_line(nn::Tensor& img, double fx0, double fy0, double fx1, double fy1,
                      const std::array<double, 3>& c) {
    const int H = img.dim(0), W = img.dim(1);
    if (!clip_segment(fx0, fy0, fx1, fy1, static_cast<double>(W), static_cast<double>(H))) return;
    int x0 = static_cast<int>(std::lround(fx0));
    int y0 = static_cast<int>(std::lround(fy0));
    const int x1 = static_cast<int>(std::lround(fx1));
    const int y1 = static_cast<int>(std::lround(fy1));
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put_pixel(img, x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

} // namespace detail

/**
 * Deterministic 1-pixel polyline rendering of a 68-point set over a black
 * background: one fixed color per part, fixed draw order, out-of-frame
 * geometry clipped.
 */
inline LandmarkFrame rasterize(const nn::Tensor& points, int H, int W) {
    if (points.shape != std::vector<int>{kNumLandmarks, 2})
        throw std::invalid_argument("rasterize: points must be 68 x 2");
    if (!points.all_finite()) throw std::invalid_argument("rasterize: non-finite points");
    if (H < 64 || W < 64) throw std::invalid_argument("rasterize: frame must be at least 64 x 64");
    LandmarkFrame frame;
    frame.points = points;
    frame.image = nn::Tensor::zeros({H, W, 3});
    for (const auto& part : detail::landmark_parts()) {
        for (int i = part.begin; i < part.end; ++i)
            detail::draw_line(frame.image, points.at(i, 0), points.at(i, 1), points.at(i + 1, 0),
                              points.at(i + 1, 1), part.color);
        if (part.closed)
            detail::draw_line(frame.image, points.at(part.end, 0), points.at(part.end, 1),
                              points.at(part.begin, 0), points.at(part.begin, 1), part.color);
    }
    return frame;
}

} // namespace tth::face
