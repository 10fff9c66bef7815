/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/anim/train.hpp
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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tth/anim/losses.hpp"
#include "tth/anim/nets.hpp"
#include "tth/common/rng.hpp"
#include "tth/data/corpus.hpp"
#include "tth/data/mask_words.hpp"
#include "tth/nn/adam.hpp"

namespace tth::anim {

/**
 * Appendix schedule: learning rate fixed for `epochs_fixed`, then linearly
 * decayed to zero over `epochs_decay`; batch 32; Adam beta1 0.5, beta2
 * 0.99; generator lr 5e-4, discriminator lr 1e-5. Mouth trains 400+400
 * epochs, upper and head 50+50.
 */
struct TrainSchedule {
    int epochs_fixed = 400;
    int epochs_decay = 400;
    int batch_size = 32;
    double g_lr = 5e-4;
    double d_lr = 1e-5;

    int total_epochs() const { return epochs_fixed + epochs_decay; }

    static TrainSchedule mouth_default() { return {400, 400, 32, 5e-4, 1e-5}; }
    static TrainSchedule encdec_default() { return {50, 50, 32, 5e-4, 1e-5}; }
};

struct EpochLosses {
    int epoch = 0;
    double g_adv = 0.0;
    double g_rec = 0.0;
    double d_loss = 0.0;
};

inline void write_curves_csv(const std::filesystem::path& path, const std::vector<EpochLosses>& curves) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write curves file " + path.string());
    f << "epoch,g_adv,g_rec,d_loss\n";
    char buf[128];
    for (const auto& e : curves) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.g_adv, e.g_rec, e.d_loss);
        f << buf;
    }
}

namespace detail {

/// Input symbol track for one training sample; upper/head draw the unknown-
/// word augmentation (1-3 whole word runs masked) per epoch.
inline std::vector<int> training_symbols(const data::Utterance& u, AnimRole role, common::Rng& rng) {
    if (role == AnimRole::Mouth) return u.ph;
    const auto runs = data::word_runs(u.w);
    if (runs.empty()) return u.w;
    const int k = std::min(1 + rng.uniform_int(3), static_cast<int>(runs.size()));
    return data::mask_unknown_words(u.w, k, rng);
}

} // namespace detail

/**
 * Alternating LSGAN training of one generator bundle. The generator loss is
 * the adversarial term plus lambda times the reconstruction term (L1 for
 * mouth, SSIM-Seq for upper and head), averaged over the batch. Fully
 * deterministic in (bundle seed, corpus, schedule, seed).
 */
inline std::vector<EpochLosses> train_generator(GeneratorBundle& b, const data::Corpus& corpus,
                                                const TrainSchedule& sch, std::uint64_t seed) {
    std::vector<int> train_idx = corpus.train_indices();
    if (train_idx.empty()) throw std::invalid_argument("train_generator: empty training corpus");
    common::Rng rng(common::stage_seed(seed, std::string("anim.") + role_name(b.role) + ".train"));
    nn::Adam g_opt(nn::AdamConfig{0.5, 0.99, 1e-8});
    nn::Adam d_opt(nn::AdamConfig{0.5, 0.99, 1e-8});

    std::vector<EpochLosses> curves;
    for (int epoch = 0; epoch < sch.total_epochs(); ++epoch) {
        const double g_lr = nn::linear_decay_lr(sch.g_lr, 0.0, epoch, sch.epochs_fixed, sch.total_epochs());
        const double d_lr = nn::linear_decay_lr(sch.d_lr, 0.0, epoch, sch.epochs_fixed, sch.total_epochs());
        common::shuffle(train_idx, rng);

        EpochLosses ep;
        ep.epoch = epoch;
        int steps = 0;
        try {
            for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(sch.batch_size)) {
                const std::size_t end = std::min(train_idx.size(), start + static_cast<std::size_t>(sch.batch_size));
                const int B = static_cast<int>(end - start);

                std::vector<std::vector<int>> symbols;
                std::vector<nn::Tensor> fakes;
                symbols.reserve(static_cast<std::size_t>(B));

                // generator step: discriminator parameters enter as constants
                nn::Tape tg;
                const nn::TapeBinding Pg(tg, b.gen);
                const nn::ConstBinding Pd_frozen(tg, b.disc);
                int g_total = -1;
                double adv_sum = 0.0, rec_sum = 0.0;
                for (std::size_t s = start; s < end; ++s) {
                    const auto& u = corpus.utterances[static_cast<std::size_t>(train_idx[s])];
                    symbols.push_back(detail::training_symbols(u, b.role, rng));
                    const int pred = b.forward(tg, Pg, symbols.back(), u.emotion);
                    const nn::Tensor& target =
                        b.role == AnimRole::Mouth ? u.m_mou : (b.role == AnimRole::Upper ? u.m_upp : u.m_hed);
                    const int rec = b.role == AnimRole::Mouth
                                        ? l1_seq_node(tg, pred, tg.constant(target))
                                        : ssim_seq_loss_node(tg, pred, tg.constant(target));
                    const int d_fake = forward_patch_disc(tg, Pd_frozen, pred);
                    const int adv = lsgan_g_node(tg, d_fake);
                    adv_sum += tg.val(adv).data[0];
                    rec_sum += tg.val(rec).data[0];
                    const int sample = tg.add(adv, tg.scale(rec, b.lambda));
                    g_total = g_total < 0 ? sample : tg.add(g_total, sample);
                    fakes.push_back(tg.val(pred));
                }
                g_total = tg.scale(g_total, 1.0 / B);
                tg.backward_scalar(g_total);
                g_opt.step(b.gen, Pg.collect_grads(), g_lr);

                // discriminator step on detached fakes
                nn::Tape td;
                const nn::TapeBinding Pd(td, b.disc);
                int d_total = -1;
                double d_sum = 0.0;
                for (std::size_t s = start; s < end; ++s) {
                    const auto& u = corpus.utterances[static_cast<std::size_t>(train_idx[s])];
                    const nn::Tensor& target =
                        b.role == AnimRole::Mouth ? u.m_mou : (b.role == AnimRole::Upper ? u.m_upp : u.m_hed);
                    const int d_real = forward_patch_disc(td, Pd, td.constant(target));
                    const int d_fake = forward_patch_disc(td, Pd, td.constant(fakes[s - start]));
                    const int dl = lsgan_d_node(td, d_real, d_fake);
                    d_sum += td.val(dl).data[0];
                    d_total = d_total < 0 ? dl : td.add(d_total, dl);
                }
                d_total = td.scale(d_total, 1.0 / B);
                td.backward_scalar(d_total);
                d_opt.step(b.disc, Pd.collect_grads(), d_lr);

                ep.g_adv += adv_sum / B;
                ep.g_rec += rec_sum / B;
                ep.d_loss += d_sum / B;
                ++steps;
            }
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("train_generator: diverged at epoch " + std::to_string(epoch) +
                                     ": " + e.what());
        }
        ep.g_adv /= steps;
        ep.g_rec /= steps;
        ep.d_loss /= steps;
        curves.push_back(ep);
    }
    return curves;
}

} // namespace tth::anim
