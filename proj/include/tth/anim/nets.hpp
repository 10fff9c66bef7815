/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/anim/nets.hpp
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

#include <stdexcept>
#include <string>
#include <vector>

#include "tth/anim/losses.hpp"
#include "tth/common/rng.hpp"
#include "tth/data/vocab.hpp"
#include "tth/nn/layers.hpp"
#include "tth/nn/tape.hpp"
#include "tth/nn/weights.hpp"

namespace tth::anim {

inline constexpr int kEmbedDim = 128;

struct MouthNetConfig {
    int embed_dim = kEmbedDim;
    int channels = 64;
    int blocks = 4;
};

/// Encoder-decoder: 3 stride-2 down convs, 2 dilated bottleneck blocks
/// (dilation 2 and 4), 3 stride-2 transposed convs; total stride 8.
struct EncDecConfig {
    int embed_dim = kEmbedDim;
    int channels = 64;
};

struct PatchDiscConfig {
    int channels = 64;
};

inline constexpr int kEncDecStride = 8;

// ---- G^mou: phoneme embedding -> conv -> Res1D stack -> conv -------------

inline void init_mouth_net(nn::ParamStore& s, common::Rng& rng, const MouthNetConfig& cfg) {
    nn::init_embedding(s, rng, "emb.ph", data::kPhonemeVocab, cfg.embed_dim);
    nn::init_conv1d(s, rng, "in", 5, cfg.embed_dim, cfg.channels);
    for (int b = 0; b < cfg.blocks; ++b)
        nn::init_res1d(s, rng, "res" + std::to_string(b), cfg.channels);
    nn::init_conv1d(s, rng, "out", 5, cfg.channels, data::kMouthDims);
}

template <class Binding>
int forward_mouth(nn::Tape& t, const Binding& P, const MouthNetConfig& cfg,
                         const std::vector<int>& ph) {
    if (ph.empty()) throw std::invalid_argument("forward_mouth: empty phoneme sequence");
    int h = t.embed(P["emb.ph"], ph);
    h = t.relu(nn::conv1d_block(t, P, "in", h));
    for (int b = 0; b < cfg.blocks; ++b) h = nn::res1d_block(t, P, "res" + std::to_string(b), h);
    return nn::conv1d_block(t, P, "out", h);
}

/// Frames a symmetric conv stack cannot see across: every layer is kernel 5
/// (radius 2), so the radius is 2 * (2 * blocks + 2).
inline int mouth_receptive_radius(const MouthNetConfig& cfg) { return 2 * (2 * cfg.blocks + 2); }

// ---- G^upp / G^hed: embeddings -> encoder-decoder ------------------------

inline void init_encdec_net(nn::ParamStore& s, common::Rng& rng, const EncDecConfig& cfg,
                            bool with_emotion, int out_dims) {
    nn::init_embedding(s, rng, "emb.w", data::kWordVocab, cfg.embed_dim);
    if (with_emotion) nn::init_embedding(s, rng, "emb.emo", data::kEmotionVocab, cfg.embed_dim);
    const int in = with_emotion ? 2 * cfg.embed_dim : cfg.embed_dim;
    const int C = cfg.channels;
    nn::init_conv1d(s, rng, "enc1", 5, in, C);
    nn::init_conv1d(s, rng, "enc2", 5, C, 2 * C);
    nn::init_conv1d(s, rng, "enc3", 5, 2 * C, 4 * C);
    nn::init_res1d(s, rng, "mid0", 4 * C);
    nn::init_res1d(s, rng, "mid1", 4 * C);
    nn::init_conv1d_transpose(s, rng, "dec1", 5, 2 * C, 4 * C);
    nn::init_conv1d_transpose(s, rng, "dec2", 5, C, 2 * C);
    nn::init_conv1d_transpose(s, rng, "dec3", 5, C, C);
    nn::init_conv1d(s, rng, "out", 5, C, out_dims);
}

template <class Binding>
int forward_encdec(nn::Tape& t, const Binding& P, const EncDecConfig& cfg,
                          const std::vector<int>& w, int emotion, int out_dims) {
    (void)out_dims;
    if (w.empty()) throw std::invalid_argument("forward_encdec: empty word sequence");
    const int T = static_cast<int>(w.size());
    int h = t.embed(P["emb.w"], w);
    if (emotion >= 0) {
        const int e = t.embed(P["emb.emo"], {emotion});
        h = t.concat_lastdim(h, t.broadcast_row(t.reshape(e, {cfg.embed_dim}), T));
    }
    const int Tp = ((T + kEncDecStride - 1) / kEncDecStride) * kEncDecStride;
    if (Tp != T) h = t.pad_rows(h, Tp);
    h = t.relu(nn::conv1d_block(t, P, "enc1", h, 2));
    h = t.relu(nn::conv1d_block(t, P, "enc2", h, 2));
    h = t.relu(nn::conv1d_block(t, P, "enc3", h, 2));
    h = nn::res1d_block(t, P, "mid0", h, 2);
    h = nn::res1d_block(t, P, "mid1", h, 4);
    h = t.relu(nn::conv1d_transpose_block(t, P, "dec1", h, 2, Tp / 4));
    h = t.relu(nn::conv1d_transpose_block(t, P, "dec2", h, 2, Tp / 2));
    h = t.relu(nn::conv1d_transpose_block(t, P, "dec3", h, 2, Tp));
    h = nn::conv1d_block(t, P, "out", h);
    if (Tp != T) h = t.slice_rows(h, 0, T);
    return h;
}

// ---- patch discriminator on parameter sequences --------------------------

inline void init_patch_disc(nn::ParamStore& s, common::Rng& rng, const PatchDiscConfig& cfg,
                            int in_dims) {
    const int C = cfg.channels;
    nn::init_conv1d(s, rng, "d1", 5, in_dims, C);
    nn::init_res1d(s, rng, "dr1", C);
    nn::init_conv1d(s, rng, "d2", 5, C, 2 * C);
    nn::init_res1d(s, rng, "dr2", 2 * C);
    nn::init_conv1d(s, rng, "dout", 5, 2 * C, 1);
}

/// One score per temporal trunk: two stride-2 stages give ceil(T/4) scores.
template <class Binding>
int forward_patch_disc(nn::Tape& t, const Binding& P, int seq) {
    if (t.val(seq).rows() < 4)
        throw std::invalid_argument("forward_patch_disc: sequence shorter than one trunk");
    int h = t.relu(nn::conv1d_block(t, P, "d1", seq, 2));
    h = nn::res1d_block(t, P, "dr1", h);
    h = t.relu(nn::conv1d_block(t, P, "d2", h, 2));
    h = nn::res1d_block(t, P, "dr2", h);
    return nn::conv1d_block(t, P, "dout", h);
}

// ---- bundles -------------------------------------------------------------

enum class AnimRole { Mouth, Upper, Head };

inline const char* role_name(AnimRole r) {
    switch (r) {
        case AnimRole::Mouth: return "mouth";
        case AnimRole::Upper: return "upper";
        default: return "head";
    }
}

inline int role_out_dims(AnimRole r) {
    switch (r) {
        case AnimRole::Mouth: return data::kMouthDims;
        case AnimRole::Upper: return data::kUpperDims;
        default: return data::kHeadDims;
    }
}

/**
 * One speaker-independent generator with its discriminator: the mouth net
 * reads phonemes only, the upper net reads words plus emotion, the head
 * net reads words only. Reconstruction weight 50 for mouth L1, 100 for the
 * SSIM-Seq losses of upper and head.
 */
struct GeneratorBundle {
    AnimRole role = AnimRole::Mouth;
    MouthNetConfig mouth_cfg;
    EncDecConfig encdec_cfg;
    PatchDiscConfig disc_cfg;
    double lambda = kLambdaMouth;
    nn::ParamStore gen;
    nn::ParamStore disc;

    static GeneratorBundle make(AnimRole role, std::uint64_t seed, MouthNetConfig mcfg = {},
                                EncDecConfig ecfg = {}, PatchDiscConfig dcfg = {}) {
        GeneratorBundle b;
        b.role = role;
        b.mouth_cfg = mcfg;
        b.encdec_cfg = ecfg;
        b.disc_cfg = dcfg;
        b.lambda = role == AnimRole::Mouth ? kLambdaMouth : kLambdaUpper;
        common::Rng grng(common::stage_seed(seed, std::string("anim.") + role_name(role) + ".gen"));
        common::Rng drng(common::stage_seed(seed, std::string("anim.") + role_name(role) + ".disc"));
        if (role == AnimRole::Mouth)
            init_mouth_net(b.gen, grng, mcfg);
        else
            init_encdec_net(b.gen, grng, ecfg, role == AnimRole::Upper, role_out_dims(role));
        init_patch_disc(b.disc, drng, dcfg, role_out_dims(role));
        return b;
    }

    /// Forward on an existing tape; `emotion` is ignored except for Upper.
    template <class Binding>
    int forward(nn::Tape& t, const Binding& P, const std::vector<int>& symbols,
                int emotion) const {
        switch (role) {
            case AnimRole::Mouth: return forward_mouth(t, P, mouth_cfg, symbols);
            case AnimRole::Upper: return forward_encdec(t, P, encdec_cfg, symbols, emotion, data::kUpperDims);
            default: return forward_encdec(t, P, encdec_cfg, symbols, -1, data::kHeadDims);
        }
    }

    /// Inference without gradients.
    nn::Tensor generate(const std::vector<int>& symbols, int emotion = -1) const {
        nn::Tape t;
        const nn::TapeBinding P(t, gen);
        return t.val(forward(t, P, symbols, emotion));
    }
};

} // namespace tth::anim
