/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/metrics/metrics.hpp
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
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tth/anim/losses.hpp"
#include "tth/data/vocab.hpp"
#include "tth/face/model.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::metrics {

inline constexpr int kLipBegin = 48;
inline constexpr int kLipEnd = 68;
inline constexpr int kSsimWindow = 8;

/// Mean squared difference over all entries of two equally shaped sequences.
inline double mse_params(const nn::Tensor& m, const nn::Tensor& mh) {
    if (m.shape != mh.shape || m.data.empty())
        throw std::invalid_argument("mse_params: non-empty equal shapes required");
    double s = 0.0;
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        const double d = m.data[i] - mh.data[i];
        s += d * d;
    }
    return s / static_cast<double>(m.data.size());
}

/**
 * Lips landmark distance on the 3D mesh: both mouth sequences are completed
 * with the same shape and upper-face parameters, evaluated without any pose,
 * and compared at the 20 lip landmarks by mean Euclidean distance.
 */
inline double lmd_3d(const face::FaceModel& model, const std::vector<double>& s,
                     const nn::Tensor& m_real, const nn::Tensor& m_hat,
                     const nn::Tensor& upper) {
    model.validate();
    if (m_real.rank() != 2 || m_real.cols() != data::kMouthDims || m_real.shape != m_hat.shape)
        throw std::invalid_argument("lmd_3d: mouth sequences must share a T x 28 shape");
    if (upper.rank() != 2 || upper.cols() != data::kUpperDims || upper.rows() != m_real.rows())
        throw std::invalid_argument("lmd_3d: upper sequence must be T x 23");
    const int T = m_real.rows();
    if (T == 0) throw std::invalid_argument("lmd_3d: empty sequence");

    double total = 0.0;
    std::vector<double> ea(static_cast<std::size_t>(face::kExprDims), 0.0);
    std::vector<double> eb(static_cast<std::size_t>(face::kExprDims), 0.0);
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < data::kUpperDims; ++j) ea[static_cast<std::size_t>(j)] = upper.at(t, j);
        eb = ea;
        for (int j = 0; j < data::kMouthDims; ++j) {
            ea[static_cast<std::size_t>(data::kUpperDims + j)] = m_real.at(t, j);
            eb[static_cast<std::size_t>(data::kUpperDims + j)] = m_hat.at(t, j);
        }
        const nn::Tensor va = face::eval_model(model, s, ea);
        const nn::Tensor vb = face::eval_model(model, s, eb);
        for (int l = kLipBegin; l < kLipEnd; ++l) {
            const int vi = model.landmarks[static_cast<std::size_t>(l)];
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                const double d = va.at(vi, c) - vb.at(vi, c);
                d2 += d * d;
            }
            total += std::sqrt(d2);
        }
    }
    return total / static_cast<double>(T * (kLipEnd - kLipBegin));
}

/// Mean per-dimension temporal SSIM, the complement of the training loss.
inline double ssim_param_metric(const nn::Tensor& m, const nn::Tensor& mh) {
    return 1.0 - anim::ssim_seq_loss(m, mh);
}

/**
 * Windowed image SSIM over non-overlapping 8x8 luminance windows, with
 * luminance the per-pixel RGB mean and the dynamic range fixed to 1.
 */
inline double ssim_image(const nn::Tensor& img, const nn::Tensor& ref) {
    if (img.rank() != 3 || img.dim(2) != 3 || img.shape != ref.shape)
        throw std::invalid_argument("ssim_image: two H x W x 3 images of one shape required");
    const int H = img.dim(0), W = img.dim(1);
    if (H < kSsimWindow || W < kSsimWindow)
        throw std::invalid_argument("ssim_image: images must cover at least one 8x8 window");

    auto luma = [](const nn::Tensor& t, int y, int x) {
        return (t.at(y, x, 0) + t.at(y, x, 1) + t.at(y, x, 2)) / 3.0;
    };

    const double n = static_cast<double>(kSsimWindow * kSsimWindow);
    double total = 0.0;
    int windows = 0;
    for (int y0 = 0; y0 + kSsimWindow <= H; y0 += kSsimWindow)
        for (int x0 = 0; x0 + kSsimWindow <= W; x0 += kSsimWindow) {
            double mx = 0.0, my = 0.0;
            for (int y = 0; y < kSsimWindow; ++y)
                for (int x = 0; x < kSsimWindow; ++x) {
                    mx += luma(img, y0 + y, x0 + x);
                    my += luma(ref, y0 + y, x0 + x);
                }
            mx /= n;
            my /= n;
            double vx = 0.0, vy = 0.0, cov = 0.0;
            for (int y = 0; y < kSsimWindow; ++y)
                for (int x = 0; x < kSsimWindow; ++x) {
                    const double dx = luma(img, y0 + y, x0 + x) - mx;
                    const double dy = luma(ref, y0 + y, x0 + x) - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cov += dx * dy;
                }
            vx /= n;
            vy /= n;
            cov /= n;
            total += ((2.0 * mx * my + anim::kSsimDelta1) * (2.0 * cov + anim::kSsimDelta2)) /
                     ((mx * mx + my * my + anim::kSsimDelta1) * (vx + vy + anim::kSsimDelta2));
            ++windows;
        }
    return total / static_cast<double>(windows);
}

} // namespace tth::metrics
