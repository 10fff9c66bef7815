/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/render/perceptual.hpp
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

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/nn/tape.hpp"
#include "tth/nn/weights.hpp"

namespace tth::render {

/**
 * Frozen multi-scale feature pyramid for the perceptual loss: seeded random
 * stride-2 convolutions replacing a pretrained backbone. Stage features are
 * the pre-activation conv outputs; relu links consecutive stages.
 */
struct FeaturePyramid {
    std::vector<nn::Tensor> w;  // stage i: K x K x C_{i-1} x C_i
    std::vector<nn::Tensor> b;  // stage i: C_i
    std::vector<int> stride;    // stage i: conv stride, >= 1

    int stages() const { return static_cast<int>(w.size()); }

    void validate() const {
        if (w.empty() || w.size() != b.size() || w.size() != stride.size())
            throw std::invalid_argument("FeaturePyramid: stage weight/bias/stride lists must match");
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i].rank() != 4 || b[i].rank() != 1 || w[i].dim(3) != b[i].dim(0))
                throw std::invalid_argument("FeaturePyramid: bad stage shapes");
            if (i > 0 && w[i].dim(2) != w[i - 1].dim(3))
                throw std::invalid_argument("FeaturePyramid: stage channels must chain");
            if (stride[i] < 1)
                throw std::invalid_argument("FeaturePyramid: stride must be positive");
            if (!w[i].all_finite() || !b[i].all_finite())
                throw std::invalid_argument("FeaturePyramid: non-finite weights");
        }
    }

    static FeaturePyramid make(std::uint64_t seed, int in_channels = 3, int num_stages = 4,
                               int base_channels = 8) {
        if (num_stages < 1) throw std::invalid_argument("FeaturePyramid: at least one stage");
        common::Rng rng(common::stage_seed(seed, "render.perceptual"));
        FeaturePyramid p;
        int cin = in_channels;
        int cout = base_channels;
        for (int i = 0; i < num_stages; ++i) {
            p.w.push_back(nn::uniform_fanin(rng, {3, 3, cin, cout}, 9 * cin));
            p.b.push_back(nn::uniform_fanin(rng, {cout}, 9 * cin));
            p.stride.push_back(2);
            cin = cout;
            cout *= 2;
        }
        return p;
    }
};

/// Stage feature nodes F_1..F_n for one image node.
inline std::vector<int> pyramid_nodes(nn::Tape& t, const FeaturePyramid& pyr, int image) {
    pyr.validate();
    if (t.val(image).rank() != 3 || t.val(image).dim(2) != pyr.w[0].dim(2))
        throw std::invalid_argument("pyramid_nodes: image channels must match stage 0");
    std::vector<int> feats;
    feats.reserve(pyr.w.size());
    int x = image;
    for (std::size_t i = 0; i < pyr.w.size(); ++i) {
        const int f = t.conv2d(x, t.constant(pyr.w[i]), t.constant(pyr.b[i]), pyr.stride[i]);
        feats.push_back(f);
        x = t.relu(f);
    }
    return feats;
}

/// sum_i (1 / (W_i H_i C_i)) * ||F_i(I) - F_i(Ihat)||_1 as a tape node.
inline int loss_perceptual_node(nn::Tape& t, const FeaturePyramid& pyr, int real, int fake) {
    if (t.val(real).shape != t.val(fake).shape)
        throw std::invalid_argument("loss_perceptual: image shapes must match");
    const std::vector<int> fr = pyramid_nodes(t, pyr, real);
    const std::vector<int> ff = pyramid_nodes(t, pyr, fake);
    int total = -1;
    for (std::size_t i = 0; i < fr.size(); ++i) {
        const int term = t.mean_all(t.abs_op(t.sub(fr[i], ff[i])));
        total = i == 0 ? term : t.add(total, term);
    }
    return total;
}

inline double loss_perceptual(const FeaturePyramid& pyr, const nn::Tensor& real,
                              const nn::Tensor& fake) {
    nn::Tape t;
    return t.val(loss_perceptual_node(t, pyr, t.constant(real), t.constant(fake))).data[0];
}

} // namespace tth::render
