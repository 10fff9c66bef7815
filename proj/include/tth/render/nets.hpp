/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/render/nets.hpp
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

#include "tth/common/rng.hpp"
#include "tth/nn/layers.hpp"
#include "tth/nn/weights.hpp"
#include "tth/render/volume.hpp"

namespace tth::render {

inline constexpr int kImageChannels = 3;
inline constexpr int kDiscScales = 3;

struct RendererConfig {
    int channels = 16; // full-pathway width; features run at twice this
};

/**
 * Two-pathway feature extractor plus three rendering heads. The full-scale
 * and half-scale pathways meet at half resolution by element-wise sum; the
 * face and mask heads share the first 3 residual blocks; face/color finish
 * in tanh and the fusion mask in sigmoid.
 */
struct RendererNets {
    RendererConfig cfg;
    int in_channels = kVolumeWindow * kImageChannels;
    nn::ParamStore params;

    static RendererNets make(std::uint64_t seed, RendererConfig cfg = {},
                             int in_channels = kVolumeWindow * kImageChannels) {
        if (cfg.channels < 1) throw std::invalid_argument("RendererNets: channels must be positive");
        RendererNets n;
        n.cfg = cfg;
        n.in_channels = in_channels;
        common::Rng rng(common::stage_seed(seed, "render.gen"));
        const int C = cfg.channels, F = 2 * cfg.channels;
        auto& s = n.params;
        nn::init_conv2d(s, rng, "feat.full.c1", 3, in_channels, C);
        nn::init_conv2d(s, rng, "feat.full.c2", 3, C, F);
        nn::init_conv2d(s, rng, "feat.half.c1", 3, in_channels, C);
        nn::init_conv2d(s, rng, "feat.half.c2", 3, C, F);
        for (int i = 1; i <= 3; ++i)
            nn::init_res2d(s, rng, "rend.shared.r" + std::to_string(i), F);
        nn::init_conv2d(s, rng, "rend.face.up", 3, F, C);
        nn::init_conv2d(s, rng, "rend.face.out", 3, C, kImageChannels);
        nn::init_conv2d(s, rng, "rend.mask.up", 3, F, C);
        nn::init_conv2d(s, rng, "rend.mask.out", 3, C, 1);
        for (int i = 1; i <= 3; ++i)
            nn::init_res2d(s, rng, "rend.clr.r" + std::to_string(i), F);
        nn::init_conv2d(s, rng, "rend.clr.up", 3, F, C);
        nn::init_conv2d(s, rng, "rend.clr.out", 3, C, kImageChannels);
        return n;
    }
};

/// Node ids of the three head outputs and the attention-fused image.
struct RenderNodes {
    int face = -1;
    int color = -1;
    int mask = -1;
    int fused = -1;
};

namespace detail {

template <class Binding>
int feature_nodes(nn::Tape& t, const Binding& P, int v) {
    int full = t.relu(nn::conv2d_block(t, P, "feat.full.c1", v, 1));
    full = t.relu(nn::conv2d_block(t, P, "feat.full.c2", full, 2));
    int half = t.avgpool2d(v, 2);
    half = t.relu(nn::conv2d_block(t, P, "feat.half.c1", half, 1));
    half = t.relu(nn::conv2d_block(t, P, "feat.half.c2", half, 1));
    return t.add(full, half);
}

template <class Binding>
int head_nodes(nn::Tape& t, const Binding& P, const std::string& branch, int x) {
    int h = t.relu(nn::conv2d_block(t, P, branch + ".up", t.upsample2d(x, 2), 1));
    return nn::conv2d_block(t, P, branch + ".out", h, 1);
}

} // namespace detail

/// Full renderer graph for one volume node; fused = M*face + (1-M)*color.
template <class Binding>
RenderNodes render_nodes(nn::Tape& t, const Binding& P, int v) {
    const nn::Tensor& vv = t.val(v);
    if (vv.rank() != 3) throw std::invalid_argument("render_nodes: rank-3 volume required");
    if (vv.dim(0) % 2 != 0 || vv.dim(1) % 2 != 0)
        throw std::invalid_argument("render_nodes: height and width must be even");

    const int feat = detail::feature_nodes(t, P, v);
    int shared = feat;
    for (int i = 1; i <= 3; ++i)
        shared = nn::res2d_block(t, P, "rend.shared.r" + std::to_string(i), shared);
    RenderNodes r;
    r.face = t.tanh_op(detail::head_nodes(t, P, "rend.face", shared));
    r.mask = t.sigmoid_op(detail::head_nodes(t, P, "rend.mask", shared));
    int clr = feat;
    for (int i = 1; i <= 3; ++i) clr = nn::res2d_block(t, P, "rend.clr.r" + std::to_string(i), clr);
    r.color = t.tanh_op(detail::head_nodes(t, P, "rend.clr", clr));

    const int inv_mask = t.add_scalar(t.scale(r.mask, -1.0), 1.0);
    r.fused = t.add(t.mul_bcast_lastdim(r.face, r.mask), t.mul_bcast_lastdim(r.color, inv_mask));
    return r;
}

struct RenderOut {
    nn::Tensor face;  // H x W x 3 in [-1, 1]
    nn::Tensor color; // H x W x 3 in [-1, 1]
    nn::Tensor mask;  // H x W x 1 in [0, 1]
    nn::Tensor fused; // H x W x 3
};

inline RenderOut render_frame(const RendererNets& nets, const Volume& v) {
    v.validate();
    if (v.channels() != nets.in_channels)
        throw std::invalid_argument("render_frame: volume channels do not match the nets");
    nn::Tape t;
    const nn::ConstBinding P(t, nets.params);
    const RenderNodes r = render_nodes(t, P, t.constant(v.data));
    return RenderOut{t.val(r.face), t.val(r.color), t.val(r.mask), t.val(r.fused)};
}

struct VidDiscConfig {
    int channels = 16;
};

/**
 * Multi-scale patch discriminator over (image, volume) channel
 * concatenations: one conv trunk applied to the 1x, 1/2x and 1/4x
 * average-pooled inputs, one patch map per scale.
 */
struct VidDisc {
    VidDiscConfig cfg;
    int in_channels = kImageChannels + kVolumeWindow * kImageChannels;
    nn::ParamStore params;

    static VidDisc make(std::uint64_t seed, VidDiscConfig cfg = {},
                        int in_channels = kImageChannels + kVolumeWindow * kImageChannels) {
        if (cfg.channels < 1) throw std::invalid_argument("VidDisc: channels must be positive");
        VidDisc d;
        d.cfg = cfg;
        d.in_channels = in_channels;
        common::Rng rng(common::stage_seed(seed, "render.disc"));
        nn::init_conv2d(d.params, rng, "d.c1", 3, in_channels, cfg.channels);
        nn::init_conv2d(d.params, rng, "d.c2", 3, cfg.channels, 2 * cfg.channels);
        nn::init_conv2d(d.params, rng, "d.out", 3, 2 * cfg.channels, 1);
        return d;
    }
};

/// Patch-map node ids at scales 1, 1/2, 1/4 for one (image, volume) pair.
template <class Binding>
std::array<int, kDiscScales> disc_nodes(nn::Tape& t, const Binding& P, int image, int volume) {
    const nn::Tensor& iv = t.val(image);
    const nn::Tensor& vv = t.val(volume);
    if (iv.rank() != 3 || vv.rank() != 3 || iv.dim(0) != vv.dim(0) || iv.dim(1) != vv.dim(1))
        throw std::invalid_argument("disc_nodes: image and volume sizes must match");
    if (iv.dim(0) % 4 != 0 || iv.dim(1) % 4 != 0)
        throw std::invalid_argument("disc_nodes: height and width must divide by 4");

    const int x = t.concat_lastdim(image, volume);
    std::array<int, kDiscScales> patches{};
    for (int s = 0; s < kDiscScales; ++s) {
        const int in = s == 0 ? x : t.avgpool2d(x, 1 << s);
        int h = t.relu(nn::conv2d_block(t, P, "d.c1", in, 2));
        h = t.relu(nn::conv2d_block(t, P, "d.c2", h, 2));
        patches[static_cast<std::size_t>(s)] = nn::conv2d_block(t, P, "d.out", h, 1);
    }
    return patches;
}

} // namespace tth::render
