/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/style/style.hpp
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
#include <vector>

#include "tth/anim/nets.hpp"
#include "tth/common/rng.hpp"
#include "tth/data/corpus.hpp"
#include "tth/face/model.hpp"
#include "tth/nn/adam.hpp"
#include "tth/nn/layers.hpp"
#include "tth/nn/weights.hpp"

namespace tth::style {

/// Frame-aligned generic/personal mouth parameter pairs: row t of both
/// sides describes the same phoneme timestamp.
struct StylePairs {
    nn::Tensor generic;  // M x 28
    nn::Tensor personal; // M x 28

    void validate() const {
        if (generic.rank() != 2 || generic.cols() != data::kMouthDims)
            throw std::invalid_argument("StylePairs: generic side must be M x 28");
        if (personal.shape != generic.shape)
            throw std::invalid_argument("StylePairs: sides must have matching shapes");
        if (generic.rows() < 1) throw std::invalid_argument("StylePairs: at least one pair required");
        if (!generic.all_finite() || !personal.all_finite())
            throw std::invalid_argument("StylePairs: non-finite entries");
    }
};

/**
 * Pairs for style training: the generic side runs the mouth generator on
 * each reference transcript; the personal side takes the mouth sub-vector
 * (last 28 expression dims) of the per-frame fitted expressions.
 */
inline StylePairs build_pairs(const data::Corpus& reference,
                              const std::vector<nn::Tensor>& fitted_exprs,
                              const anim::GeneratorBundle& mouth) {
    if (reference.utterances.empty()) throw std::invalid_argument("build_pairs: empty reference corpus");
    if (fitted_exprs.size() != reference.utterances.size())
        throw std::invalid_argument("build_pairs: fitted expressions missing for some utterances");
    if (mouth.role != anim::AnimRole::Mouth)
        throw std::invalid_argument("build_pairs: generator bundle must be the mouth net");

    int M = 0;
    for (const auto& u : reference.utterances) M += static_cast<int>(u.ph.size());
    StylePairs pairs;
    pairs.generic = nn::Tensor::zeros({M, data::kMouthDims});
    pairs.personal = nn::Tensor::zeros({M, data::kMouthDims});

    int row = 0;
    for (std::size_t ui = 0; ui < reference.utterances.size(); ++ui) {
        const auto& u = reference.utterances[ui];
        const nn::Tensor& e = fitted_exprs[ui];
        const int T = static_cast<int>(u.ph.size());
        if (e.shape != std::vector<int>{T, face::kExprDims})
            throw std::invalid_argument("build_pairs: fitted expressions must be T x 51");
        const nn::Tensor gen = mouth.generate(u.ph);
        for (int t = 0; t < T; ++t)
            for (int j = 0; j < data::kMouthDims; ++j) {
                pairs.generic.at(row + t, j) = gen.at(t, j);
                pairs.personal.at(row + t, j) = e.at(t, data::kUpperDims + j);
            }
        row += T;
    }
    pairs.validate();
    return pairs;
}

/// Two-layer fully-connected map 28 -> H -> 28 applied per frame.
struct StyleMap {
    int hidden = 64;
    nn::ParamStore params;

    static StyleMap make(std::uint64_t seed, int hidden = 64) {
        StyleMap m;
        m.hidden = hidden;
        common::Rng rng(common::stage_seed(seed, "style.init"));
        nn::init_linear(m.params, rng, "l1", data::kMouthDims, hidden);
        nn::init_linear(m.params, rng, "l2", hidden, data::kMouthDims);
        return m;
    }

    template <class Binding>
    int forward(nn::Tape& t, const Binding& P, int x) const {
        return nn::linear_block(t, P, "l2", t.relu(nn::linear_block(t, P, "l1", x)));
    }
};

/**
 * Minimizes per-frame mean squared error with Adam; deterministic in
 * (map seed, pairs, epochs, lr, seed). Zero epochs returns the seeded
 * initial map untouched.
 */
inline std::vector<double> train_style(StyleMap& map, const StylePairs& pairs, int epochs,
                                       double lr, std::uint64_t seed, int batch_size = 256) {
    pairs.validate();
    if (epochs < 0) throw std::invalid_argument("train_style: negative epoch count");
    common::Rng rng(common::stage_seed(seed, "style.train"));
    nn::Adam opt;
    const int M = pairs.generic.rows();
    std::vector<int> order(static_cast<std::size_t>(M));
    for (int i = 0; i < M; ++i) order[static_cast<std::size_t>(i)] = i;

    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        common::shuffle(order, rng);
        double acc = 0.0;
        int steps = 0;
        for (int start = 0; start < M; start += batch_size) {
            const int B = std::min(batch_size, M - start);
            nn::Tensor x = nn::Tensor::zeros({B, data::kMouthDims});
            nn::Tensor y = nn::Tensor::zeros({B, data::kMouthDims});
            for (int b = 0; b < B; ++b) {
                const int r = order[static_cast<std::size_t>(start + b)];
                for (int j = 0; j < data::kMouthDims; ++j) {
                    x.at(b, j) = pairs.generic.at(r, j);
                    y.at(b, j) = pairs.personal.at(r, j);
                }
            }
            nn::Tape t;
            const nn::TapeBinding P(t, map.params);
            const int pred = map.forward(t, P, t.constant(x));
            const int loss = t.mean_all(t.square(t.sub(pred, t.constant(y))));
            acc += t.val(loss).data[0];
            ++steps;
            t.backward_scalar(loss);
            opt.step(map.params, P.collect_grads(), lr);
        }
        if (!map.params.all_finite())
            throw std::runtime_error("train_style: diverged at epoch " + std::to_string(epoch));
        curve.push_back(acc / steps);
    }
    return curve;
}

/// Frame-wise application of the learned map, clamped to valid blendshape
/// weights in [0, 1].
inline nn::Tensor apply_style(const StyleMap& map, const nn::Tensor& m_mou) {
    if (m_mou.rank() != 2 || m_mou.cols() != data::kMouthDims)
        throw std::invalid_argument("apply_style: input must be T x 28");
    nn::Tape t;
    const nn::ConstBinding P(t, map.params);
    nn::Tensor out = t.val(map.forward(t, P, t.constant(m_mou)));
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

} // namespace tth::style
