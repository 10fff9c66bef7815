/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/render/train.hpp
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
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/nn/adam.hpp"
#include "tth/render/losses.hpp"

namespace tth::render {

/// One supervised frame: its conditioning volume, the target image in
/// [-1, 1], and the face box used by the gamma term.
struct RenderSample {
    Volume volume;
    nn::Tensor target; // H x W x 3
    CropBox box;
};

struct RenderTrainConfig {
    int epochs = 50;
    int batch_size = 3;
    double lr0 = 2e-4; // shared by generator and discriminator
    double lr1 = 1e-4; // linear decay target across the schedule
    VidLossWeights weights;
    std::uint64_t seed = 0;
};

struct RenderEpoch {
    double g_total = 0.0;
    double g_perc = 0.0;
    double g_l1_img = 0.0;
    double g_l1_face = 0.0;
    double g_adv = 0.0;
    double d_loss = 0.0;
};

inline double render_lr(const RenderTrainConfig& cfg, int epoch) {
    if (cfg.epochs <= 1) return cfg.lr1;
    const double f = static_cast<double>(epoch) / (cfg.epochs - 1);
    return cfg.lr0 + (cfg.lr1 - cfg.lr0) * std::min(1.0, f);
}

/**
 * Alternating LSGAN training of the renderer: per minibatch one generator
 * step against the frozen discriminator, then one discriminator step on the
 * refreshed fakes. Deterministic in (nets, disc, data, config).
 */
inline std::vector<RenderEpoch> train_renderer(RendererNets& nets, VidDisc& disc,
                                               const FeaturePyramid& pyr,
                                               const std::vector<RenderSample>& data,
                                               const RenderTrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_renderer: empty dataset");
    if (cfg.epochs < 0) throw std::invalid_argument("train_renderer: negative epoch count");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_renderer: batch size must be >= 1");
    cfg.weights.validate();
    for (const auto& s : data) {
        s.volume.validate();
        if (s.volume.channels() != nets.in_channels)
            throw std::invalid_argument("train_renderer: volume channels do not match the nets");
        if (s.target.shape != std::vector<int>{s.volume.height(), s.volume.width(), kImageChannels})
            throw std::invalid_argument("train_renderer: target must match the volume resolution");
        s.box.validate(s.volume.height(), s.volume.width());
    }

    common::Rng rng(common::stage_seed(cfg.seed, "render.train"));
    nn::Adam g_opt(nn::AdamConfig{0.5, 0.999, 1e-8});
    nn::Adam d_opt(nn::AdamConfig{0.5, 0.999, 1e-8});
    const int N = static_cast<int>(data.size());
    std::vector<int> order(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) order[static_cast<std::size_t>(i)] = i;

    std::vector<RenderEpoch> curves;
    curves.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = render_lr(cfg, epoch);
        common::shuffle(order, rng);
        RenderEpoch ep;
        int steps = 0;

        for (int start = 0; start < N; start += cfg.batch_size) {
            const int B = std::min(cfg.batch_size, N - start);
            std::vector<nn::Tensor> fakes;
            fakes.reserve(static_cast<std::size_t>(B));

            {
                nn::Tape t;
                const nn::TapeBinding PG(t, nets.params);
                const nn::ConstBinding PD(t, disc.params);
                int total = -1;
                for (int bi = 0; bi < B; ++bi) {
                    const RenderSample& s = data[static_cast<std::size_t>(
                        order[static_cast<std::size_t>(start + bi)])];
                    const int vol = t.constant(s.volume.data);
                    const RenderNodes r = render_nodes(t, PG, vol);
                    const VidLossNodes n = loss_video_nodes(t, pyr, PD, r, t.constant(s.target),
                                                            vol, s.box, cfg.weights);
                    total = bi == 0 ? n.total : t.add(total, n.total);
                    ep.g_perc += t.val(n.perc).data[0];
                    ep.g_l1_img += t.val(n.l1_img).data[0];
                    ep.g_l1_face += t.val(n.l1_face).data[0];
                    for (int sc = 0; sc < kDiscScales; ++sc)
                        ep.g_adv += t.val(n.adv[static_cast<std::size_t>(sc)]).data[0];
                    fakes.push_back(t.val(r.fused));
                }
                const int mean_total = t.scale(total, 1.0 / B);
                ep.g_total += t.val(mean_total).data[0];
                t.backward_scalar(mean_total);
                g_opt.step(nets.params, PG.collect_grads(), lr);
            }

            {
                nn::Tape t;
                const nn::TapeBinding PD(t, disc.params);
                int total = -1;
                for (int bi = 0; bi < B; ++bi) {
                    const RenderSample& s = data[static_cast<std::size_t>(
                        order[static_cast<std::size_t>(start + bi)])];
                    const int term =
                        disc_loss_nodes(t, PD, t.constant(s.target),
                                        t.constant(fakes[static_cast<std::size_t>(bi)]),
                                        t.constant(s.volume.data));
                    total = bi == 0 ? term : t.add(total, term);
                }
                const int mean_total = t.scale(total, 1.0 / B);
                ep.d_loss += t.val(mean_total).data[0];
                t.backward_scalar(mean_total);
                d_opt.step(disc.params, PD.collect_grads(), lr);
            }
            ++steps;
        }

        ep.g_total /= steps;
        ep.d_loss /= steps;
        ep.g_perc /= N;
        ep.g_l1_img /= N;
        ep.g_l1_face /= N;
        ep.g_adv /= N;
        if (!nets.params.all_finite() || !disc.params.all_finite() ||
            !std::isfinite(ep.g_total) || !std::isfinite(ep.d_loss))
            throw std::runtime_error("train_renderer: diverged at epoch " + std::to_string(epoch));
        curves.push_back(ep);
    }
    return curves;
}

} // namespace tth::render
