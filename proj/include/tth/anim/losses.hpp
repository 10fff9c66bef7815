/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/anim/losses.hpp
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
#include <stdexcept>

#include "tth/nn/tape.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::anim {

inline constexpr double kSsimDelta1 = 1e-4; // (0.01 * L)^2 with dynamic range L = 1
inline constexpr double kSsimDelta2 = 9e-4; // (0.03 * L)^2
inline constexpr double kLambdaMouth = 50.0;
inline constexpr double kLambdaUpper = 100.0;

/// (1/T) * sum_t ||m_t - mhat_t||_1 on T x D sequences.
inline double l1_seq(const nn::Tensor& m, const nn::Tensor& mh) {
    nn::require_same_shape(m, mh, "l1_seq");
    if (m.rank() != 2) throw std::invalid_argument("l1_seq: rank-2 sequences required");
    double s = 0.0;
    for (std::size_t i = 0; i < m.data.size(); ++i) s += std::abs(m.data[i] - mh.data[i]);
    return s / m.rows();
}

/// Tape version of l1_seq; `target` is typically a constant node.
inline int l1_seq_node(nn::Tape& t, int pred, int target) {
    nn::require_same_shape(t.val(pred), t.val(target), "l1_seq");
    const int T = t.val(pred).rows();
    return t.scale(t.sum_all(t.abs_op(t.sub(pred, target))), 1.0 / T);
}

/**
 * SSIM-Seq loss: 1 minus the mean over dimensions of the per-dimension
 * temporal SSIM, with population statistics over the T frames.
 */
inline double ssim_seq_loss(const nn::Tensor& m, const nn::Tensor& mh, double d1 = kSsimDelta1,
                            double d2 = kSsimDelta2) {
    nn::require_same_shape(m, mh, "ssim_seq");
    if (m.rank() != 2) throw std::invalid_argument("ssim_seq: rank-2 sequences required");
    const int T = m.rows(), D = m.cols();
    if (T < 2) throw std::invalid_argument("ssim_seq: T must be >= 2");
    double acc = 0.0;
    for (int j = 0; j < D; ++j) {
        double mu = 0.0, muh = 0.0;
        for (int i = 0; i < T; ++i) {
            mu += m.at(i, j);
            muh += mh.at(i, j);
        }
        mu /= T;
        muh /= T;
        double var = 0.0, varh = 0.0, cov = 0.0;
        for (int i = 0; i < T; ++i) {
            var += (m.at(i, j) - mu) * (m.at(i, j) - mu);
            varh += (mh.at(i, j) - muh) * (mh.at(i, j) - muh);
            cov += (m.at(i, j) - mu) * (mh.at(i, j) - muh);
        }
        var /= T;
        varh /= T;
        cov /= T;
        acc += ((2.0 * mu * muh + d1) * (2.0 * cov + d2)) /
               ((mu * mu + muh * muh + d1) * (var + varh + d2));
    }
    return 1.0 - acc / D;
}

/// Tape version of ssim_seq_loss, built from differentiable primitives.
inline int ssim_seq_loss_node(nn::Tape& t, int pred, int target, double d1 = kSsimDelta1,
                              double d2 = kSsimDelta2) {
    nn::require_same_shape(t.val(pred), t.val(target), "ssim_seq");
    if (t.val(pred).rows() < 2) throw std::invalid_argument("ssim_seq: T must be >= 2");
    const int mu_p = t.mean_axis0(pred);
    const int mu_g = t.mean_axis0(target);
    const int cp = t.sub_rowvec(pred, mu_p);
    const int cg = t.sub_rowvec(target, mu_g);
    const int var_p = t.mean_axis0(t.mul(cp, cp));
    const int var_g = t.mean_axis0(t.mul(cg, cg));
    const int cov = t.mean_axis0(t.mul(cp, cg));
    const int num = t.mul(t.add_scalar(t.scale(t.mul(mu_p, mu_g), 2.0), d1),
                          t.add_scalar(t.scale(cov, 2.0), d2));
    const int den = t.mul(t.add_scalar(t.add(t.mul(mu_p, mu_p), t.mul(mu_g, mu_g)), d1),
                          t.add_scalar(t.add(var_p, var_g), d2));
    const int ssim = t.mean_all(t.div(num, den));
    return t.add_scalar(t.scale(ssim, -1.0), 1.0);
}

/// LSGAN with labels a=0 (fake), b=1 (real), c=1 (generator target).
inline double lsgan_d(const nn::Tensor& d_real, const nn::Tensor& d_fake) {
    double lr = 0.0, lf = 0.0;
    for (double v : d_real.data) lr += (v - 1.0) * (v - 1.0);
    for (double v : d_fake.data) lf += v * v;
    return 0.5 * lr / static_cast<double>(d_real.numel()) +
           0.5 * lf / static_cast<double>(d_fake.numel());
}

inline double lsgan_g(const nn::Tensor& d_fake) {
    double l = 0.0;
    for (double v : d_fake.data) l += (v - 1.0) * (v - 1.0);
    return 0.5 * l / static_cast<double>(d_fake.numel());
}

inline int lsgan_d_node(nn::Tape& t, int d_real, int d_fake) {
    const int lr = t.mean_all(t.square(t.add_scalar(d_real, -1.0)));
    const int lf = t.mean_all(t.square(d_fake));
    return t.scale(t.add(lr, lf), 0.5);
}

inline int lsgan_g_node(nn::Tape& t, int d_fake) {
    return t.scale(t.mean_all(t.square(t.add_scalar(d_fake, -1.0))), 0.5);
}

} // namespace tth::anim
