/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/render/losses.hpp
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
#include <stdexcept>

#include "tth/anim/losses.hpp"
#include "tth/render/nets.hpp"
#include "tth/render/perceptual.hpp"

namespace tth::render {

struct VidLossWeights {
    double alpha = 10.0;  // perceptual
    double beta = 100.0;  // full-image L1
    double gamma = 100.0; // face-crop L1
    double adv = 1.0;

    void validate() const {
        if (alpha < 0.0 || beta < 0.0 || gamma < 0.0 || adv < 0.0)
            throw std::invalid_argument("VidLossWeights: weights must be non-negative");
    }
};

/// Face region in pixel coordinates; supplied with the dataset rather than
/// detected.
struct CropBox {
    int y0 = 0;
    int x0 = 0;
    int h = 0;
    int w = 0;

    void validate(int H, int W) const {
        if (h < 1 || w < 1 || y0 < 0 || x0 < 0 || y0 + h > H || x0 + w > W)
            throw std::invalid_argument("CropBox: degenerate or out-of-bounds box");
    }
};

struct VidLossNodes {
    int perc = -1;
    int l1_img = -1;
    int l1_face = -1;
    std::array<int, kDiscScales> adv{-1, -1, -1};
    int total = -1;
};

/// Mean absolute difference as a tape node.
inline int l1_image_node(nn::Tape& t, int a, int b) { return t.mean_all(t.abs_op(t.sub(a, b))); }

/**
 * Generator-side loss graph: alpha * L_perc + beta * L1(I, fused) +
 * gamma * L1(crop I, crop face head) + sum of per-scale LSGAN terms on the
 * fused image. The discriminator binding decides whether its weights
 * receive gradients.
 */
template <class BindingD>
VidLossNodes loss_video_nodes(nn::Tape& t, const FeaturePyramid& pyr, const BindingD& PD,
                              const RenderNodes& r, int real, int volume, const CropBox& box,
                              const VidLossWeights& w) {
    w.validate();
    const nn::Tensor& iv = t.val(real);
    if (iv.shape != t.val(r.fused).shape)
        throw std::invalid_argument("loss_video: real image and render must share shapes");
    box.validate(iv.dim(0), iv.dim(1));

    VidLossNodes n;
    n.perc = loss_perceptual_node(t, pyr, real, r.fused);
    n.l1_img = l1_image_node(t, real, r.fused);
    n.l1_face = l1_image_node(t, t.crop2d(real, box.y0, box.x0, box.h, box.w),
                              t.crop2d(r.face, box.y0, box.x0, box.h, box.w));

    const std::array<int, kDiscScales> patches = disc_nodes(t, PD, r.fused, volume);
    int adv_sum = -1;
    for (int s = 0; s < kDiscScales; ++s) {
        n.adv[static_cast<std::size_t>(s)] = anim::lsgan_g_node(t, patches[static_cast<std::size_t>(s)]);
        adv_sum = s == 0 ? n.adv[0] : t.add(adv_sum, n.adv[static_cast<std::size_t>(s)]);
    }

    n.total = t.add(t.add(t.scale(n.perc, w.alpha), t.scale(n.l1_img, w.beta)),
                    t.add(t.scale(n.l1_face, w.gamma), t.scale(adv_sum, w.adv)));
    return n;
}

struct VidLossComponents {
    double perc = 0.0;
    double l1_img = 0.0;
    double l1_face = 0.0;
    std::array<double, kDiscScales> adv{0.0, 0.0, 0.0};
    double total = 0.0;
};

/**
 * Loss evaluation for an already-rendered frame; the total is extracted
 * from the same graph the trainer differentiates.
 */
inline VidLossComponents loss_video(const FeaturePyramid& pyr, const VidDisc& disc,
                                    const RenderOut& out, const nn::Tensor& real,
                                    const Volume& v, const CropBox& box,
                                    const VidLossWeights& w) {
    nn::Tape t;
    const nn::ConstBinding PD(t, disc.params);
    RenderNodes r;
    r.face = t.constant(out.face);
    r.color = t.constant(out.color);
    r.mask = t.constant(out.mask);
    r.fused = t.constant(out.fused);
    const VidLossNodes n =
        loss_video_nodes(t, pyr, PD, r, t.constant(real), t.constant(v.data), box, w);
    VidLossComponents c;
    c.perc = t.val(n.perc).data[0];
    c.l1_img = t.val(n.l1_img).data[0];
    c.l1_face = t.val(n.l1_face).data[0];
    for (int s = 0; s < kDiscScales; ++s)
        c.adv[static_cast<std::size_t>(s)] = t.val(n.adv[static_cast<std::size_t>(s)]).data[0];
    c.total = t.val(n.total).data[0];
    return c;
}

/// Discriminator-side LSGAN sum over the three scales.
template <class BindingD>
int disc_loss_nodes(nn::Tape& t, const BindingD& PD, int real, int fake, int volume) {
    const std::array<int, kDiscScales> pr = disc_nodes(t, PD, real, volume);
    const std::array<int, kDiscScales> pf = disc_nodes(t, PD, fake, volume);
    int total = -1;
    for (int s = 0; s < kDiscScales; ++s) {
        const int term = anim::lsgan_d_node(t, pr[static_cast<std::size_t>(s)],
                                            pf[static_cast<std::size_t>(s)]);
        total = s == 0 ? term : t.add(total, term);
    }
    return total;
}

} // namespace tth::render
