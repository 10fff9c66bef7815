/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/data/synth.hpp
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
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/data/corpus.hpp"
#include "tth/data/vocab.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::data {

/// Co-articulation smoothing kernel, applied per dimension over time with
/// border replication. Convex weights keep [0,1] tracks in range.
inline constexpr std::array<double, 5> kSmoothKernel = {0.1, 0.2, 0.4, 0.2, 0.1};

inline nn::Tensor smooth_rows(const nn::Tensor& x) {
    const int T = x.rows(), D = x.cols();
    nn::Tensor out = nn::Tensor::zeros({T, D});
    for (int t = 0; t < T; ++t)
        for (int d = 0; d < D; ++d) {
            double s = 0.0;
            for (int k = -2; k <= 2; ++k) {
                int src = t + k;
                src = src < 0 ? 0 : (src >= T ? T - 1 : src);
                s += kSmoothKernel[static_cast<std::size_t>(k + 2)] * x.at(src, d);
            }
            out.at(t, d) = s;
        }
    return out;
}

/// Fixed mouth pose per phoneme, 41 x 28 in [0.1, 0.9]. A pure function:
/// the phoneme-to-mouth mapping is identical across all generated corpora.
inline const nn::Tensor& phoneme_pose_table() {
    static const nn::Tensor table = [] {
        common::Rng rng(common::stage_seed(0x7468, "data.phoneme_poses"));
        nn::Tensor t = nn::Tensor::zeros({kPhonemeVocab, kMouthDims});
        for (double& v : t.data) v = rng.uniform(0.1, 0.9);
        // silence is a near-closed neutral mouth
        for (int d = 0; d < kMouthDims; ++d) t.at(Vocab::kSilence, d) = 0.12;
        return t;
    }();
    return table;
}

/// Fixed upper-face base pose per emotion, 4 x 23 in [0.2, 0.8].
inline const nn::Tensor& emotion_base_table() {
    static const nn::Tensor table = [] {
        common::Rng rng(common::stage_seed(0x7468, "data.emotion_bases"));
        nn::Tensor t = nn::Tensor::zeros({kEmotionVocab, kUpperDims});
        for (double& v : t.data) v = rng.uniform(0.2, 0.8);
        return t;
    }();
    return table;
}

/// Deterministic pronunciation of a word: 2-4 phoneme indices drawn from
/// the 39 ARPAbet entries by a fixed hash of the word index.
inline std::vector<int> word_pronunciation(int word) {
    const int n = 2 + word % 3;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j)
        out.push_back(1 + static_cast<int>((static_cast<unsigned>(word) * 31u + static_cast<unsigned>(j) * 17u + 7u) % 39u));
    return out;
}

namespace detail {

/// Band-limited random walk: cumulative normal steps, smoothed, centered,
/// and rescaled to `amp` around `base`.
inline std::vector<double> bounded_walk(common::Rng& rng, int T, double base, double amp) {
    nn::Tensor walk = nn::Tensor::zeros({T, 1});
    double acc = 0.0;
    for (int t = 0; t < T; ++t) {
        acc += rng.normal();
        walk.at(t, 0) = acc;
    }
    walk = smooth_rows(smooth_rows(walk));
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += walk.at(t, 0);
    mean /= T;
    double peak = 1e-9;
    for (int t = 0; t < T; ++t) peak = std::max(peak, std::abs(walk.at(t, 0) - mean));
    std::vector<double> out(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
        out[static_cast<std::size_t>(t)] = base + amp * (walk.at(t, 0) - mean) / peak;
    return out;
}

} // namespace detail

/**
 * Deterministic synthetic corpus. Mouth parameters are a smoothed pure
 * function of the phoneme track, upper-face parameters are an emotion base
 * plus slow sinusoids, head pose is a band-limited random walk around an
 * upright pose at depth 2.5.
 */
inline Corpus synth_corpus(std::uint64_t seed, int n_utts, int fps) {
    if (n_utts < 1) throw std::invalid_argument("synth_corpus: n_utts must be >= 1");
    if (fps < 1) throw std::invalid_argument("synth_corpus: fps must be >= 1");
    common::Rng rng(common::stage_seed(seed, "data.synth"));
    Corpus corpus;
    corpus.vocab = synth_vocab();

    for (int i = 0; i < n_utts; ++i) {
        Utterance u;
        u.fps = fps;
        u.emotion = rng.uniform_int(kEmotionVocab);
        const int T = 3 * fps + rng.uniform_int(3 * fps + 1);

        u.ph.assign(static_cast<std::size_t>(T), Vocab::kSilence);
        u.w.assign(static_cast<std::size_t>(T), Vocab::kUnknownWord);
        int t = 2 + rng.uniform_int(4); // leading silence
        const int tail = 2 + rng.uniform_int(4);
        while (t < T - tail) {
            const int word = 1 + rng.uniform_int(kWordVocab - 1);
            for (int p : word_pronunciation(word)) {
                const int dur = 2 + rng.uniform_int(6);
                for (int d = 0; d < dur && t < T - tail; ++d, ++t) {
                    u.ph[static_cast<std::size_t>(t)] = p;
                    u.w[static_cast<std::size_t>(t)] = word;
                }
                if (t >= T - tail) break;
            }
        }

        const nn::Tensor& poses = phoneme_pose_table();
        nn::Tensor mou = nn::Tensor::zeros({T, kMouthDims});
        for (int f = 0; f < T; ++f)
            for (int d = 0; d < kMouthDims; ++d) mou.at(f, d) = poses.at(u.ph[static_cast<std::size_t>(f)], d);
        u.m_mou = smooth_rows(mou);

        const nn::Tensor& bases = emotion_base_table();
        u.m_upp = nn::Tensor::zeros({T, kUpperDims});
        for (int d = 0; d < kUpperDims; ++d) {
            const double f1 = rng.uniform(0.2, 1.2), f2 = rng.uniform(0.2, 1.2);
            const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
            for (int f = 0; f < T; ++f) {
                const double sec = static_cast<double>(f) / fps;
                u.m_upp.at(f, d) = bases.at(u.emotion, d) +
                                   0.04 * std::sin(2.0 * std::numbers::pi * f1 * sec + p1) +
                                   0.03 * std::sin(2.0 * std::numbers::pi * f2 * sec + p2);
            }
        }

        u.m_hed = nn::Tensor::zeros({T, kHeadDims});
        static constexpr double kBase[kHeadDims] = {0.0, 0.0, 0.0, 0.0, 0.0, 2.5};
        static constexpr double kAmp[kHeadDims] = {0.12, 0.12, 0.06, 0.05, 0.05, 0.08};
        for (int d = 0; d < kHeadDims; ++d) {
            const auto track = detail::bounded_walk(rng, T, kBase[d], kAmp[d]);
            for (int f = 0; f < T; ++f) u.m_hed.at(f, d) = track[static_cast<std::size_t>(f)];
        }

        char name[16];
        std::snprintf(name, sizeof(name), "utt_%04d", i);
        corpus.names.emplace_back(name);
        corpus.utterances.push_back(std::move(u));
        corpus.is_train.push_back(n_utts < 5 || i % 5 != 4);
    }
    corpus.validate();
    return corpus;
}

} // namespace tth::data
