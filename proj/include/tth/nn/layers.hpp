/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/nn/layers.hpp
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

#include <string>

#include "tth/common/rng.hpp"
#include "tth/nn/tape.hpp"
#include "tth/nn/weights.hpp"

namespace tth::nn {

// Parameter naming: "<prefix>.w" / "<prefix>.b" for single layers,
// "<prefix>.c1.*" / "<prefix>.c2.*" inside residual blocks. Biases share the
// uniform fan-in init so padded all-zero windows never leave a pre-activation
// sitting exactly on the relu kink.

inline void init_linear(ParamStore& s, common::Rng& rng, const std::string& p, int in, int out) {
    s.add(p + ".w", uniform_fanin(rng, {in, out}, in));
    s.add(p + ".b", uniform_fanin(rng, {out}, in));
}

template <class Binding>
int linear_block(Tape& t, const Binding& P, const std::string& p, int x) {
    return t.linear(x, P[p + ".w"], P[p + ".b"]);
}

inline void init_conv1d(ParamStore& s, common::Rng& rng, const std::string& p, int K, int cin, int cout) {
    s.add(p + ".w", uniform_fanin(rng, {K, cin, cout}, K * cin));
    s.add(p + ".b", uniform_fanin(rng, {cout}, K * cin));
}

template <class Binding>
int conv1d_block(Tape& t, const Binding& P, const std::string& p, int x, int stride = 1,
                        int dilation = 1, Pad pad = Pad::Same) {
    return t.conv1d(x, P[p + ".w"], P[p + ".b"], stride, dilation, pad);
}

/// Transposed conv weight layout {K, out_channels, in_channels}.
inline void init_conv1d_transpose(ParamStore& s, common::Rng& rng, const std::string& p, int K,
                                  int cout, int cin) {
    s.add(p + ".w", uniform_fanin(rng, {K, cout, cin}, K * cin));
    s.add(p + ".b", uniform_fanin(rng, {cout}, K * cin));
}

template <class Binding>
int conv1d_transpose_block(Tape& t, const Binding& P, const std::string& p, int y,
                                  int stride, int out_len) {
    return t.conv1d_transpose(y, P[p + ".w"], P[p + ".b"], stride, out_len);
}

inline void init_conv2d(ParamStore& s, common::Rng& rng, const std::string& p, int K, int cin, int cout) {
    s.add(p + ".w", uniform_fanin(rng, {K, K, cin, cout}, K * K * cin));
    s.add(p + ".b", uniform_fanin(rng, {cout}, K * K * cin));
}

template <class Binding>
int conv2d_block(Tape& t, const Binding& P, const std::string& p, int x, int stride = 1) {
    return t.conv2d(x, P[p + ".w"], P[p + ".b"], stride);
}

inline void init_embedding(ParamStore& s, common::Rng& rng, const std::string& name, int vocab, int dim) {
    s.add(name, uniform_fanin(rng, {vocab, dim}, dim));
}

/// Res1D: conv(k5, same) -> relu -> conv(k5, same), plus identity skip.
inline void init_res1d(ParamStore& s, common::Rng& rng, const std::string& p, int channels) {
    init_conv1d(s, rng, p + ".c1", 5, channels, channels);
    init_conv1d(s, rng, p + ".c2", 5, channels, channels);
}

template <class Binding>
int res1d_block(Tape& t, const Binding& P, const std::string& p, int x, int dilation = 1) {
    int h = conv1d_block(t, P, p + ".c1", x, 1, dilation, Pad::Same);
    h = t.relu(h);
    h = conv1d_block(t, P, p + ".c2", h, 1, dilation, Pad::Same);
    return t.add(x, h);
}

/// Res2D: conv(3x3) -> relu -> conv(3x3), plus identity skip.
inline void init_res2d(ParamStore& s, common::Rng& rng, const std::string& p, int channels) {
    init_conv2d(s, rng, p + ".c1", 3, channels, channels);
    init_conv2d(s, rng, p + ".c2", 3, channels, channels);
}

template <class Binding>
int res2d_block(Tape& t, const Binding& P, const std::string& p, int x) {
    int h = conv2d_block(t, P, p + ".c1", x);
    h = t.relu(h);
    h = conv2d_block(t, P, p + ".c2", h);
    return t.add(x, h);
}

} // namespace tth::nn
