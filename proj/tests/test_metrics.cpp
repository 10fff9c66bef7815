/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: tests/test_metrics.cpp
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
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "tth/face/model.hpp"
#include "tth/metrics/metrics.hpp"

using namespace tth;
using tth::common::Rng;
using tth::nn::Tensor;

namespace {

Tensor rand_mat(Rng& rng, int r, int c, double lo, double hi) {
    Tensor t = Tensor::zeros({r, c});
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Vertex-by-vertex lip distance without the library's evaluation shortcuts.
double lmd_oracle(const face::FaceModel& model, const std::vector<double>& s, const Tensor& mr,
                  const Tensor& mh, const Tensor& up) {
    const int T = mr.rows();
    double total = 0.0;
    for (int t = 0; t < T; ++t)
        for (int l = 48; l < 68; ++l) {
            const int vi = model.landmarks[static_cast<std::size_t>(l)];
            double d2 = 0.0;
            for (int c = 0; c < 3; ++c) {
                double base = model.mean.at(vi, c);
                for (int j = 0; j < 60; ++j)
                    base += s[static_cast<std::size_t>(j)] * model.shape_basis.at(j, vi, c);
                for (int j = 0; j < 23; ++j) base += up.at(t, j) * model.expr_basis.at(j, vi, c);
                double va = base, vb = base;
                for (int j = 0; j < 28; ++j) {
                    va += mr.at(t, j) * model.expr_basis.at(23 + j, vi, c);
                    vb += mh.at(t, j) * model.expr_basis.at(23 + j, vi, c);
                }
                d2 += (va - vb) * (va - vb);
            }
            total += std::sqrt(d2);
        }
    return total / static_cast<double>(T * 20);
}

/// Independent windowed SSIM on precomputed luminance planes.
double ssim_image_oracle(const Tensor& a, const Tensor& b) {
    const int H = a.dim(0), W = a.dim(1);
    std::vector<double> la(static_cast<std::size_t>(H * W)), lb(la.size());
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            la[static_cast<std::size_t>(y * W + x)] =
                (a.at(y, x, 0) + a.at(y, x, 1) + a.at(y, x, 2)) / 3.0;
            lb[static_cast<std::size_t>(y * W + x)] =
                (b.at(y, x, 0) + b.at(y, x, 1) + b.at(y, x, 2)) / 3.0;
        }
    double total = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + 8 <= H; y0 += 8)
        for (int x0 = 0; x0 + 8 <= W; x0 += 8) {
            double mx = 0.0, my = 0.0, vx = 0.0, vy = 0.0, cov = 0.0;
            for (int y = y0; y < y0 + 8; ++y)
                for (int x = x0; x < x0 + 8; ++x) {
                    mx += la[static_cast<std::size_t>(y * W + x)];
                    my += lb[static_cast<std::size_t>(y * W + x)];
                }
            mx /= 64.0;
            my /= 64.0;
            for (int y = y0; y < y0 + 8; ++y)
                for (int x = x0; x < x0 + 8; ++x) {
                    const double dx = la[static_cast<std::size_t>(y * W + x)] - mx;
                    const double dy = lb[static_cast<std::size_t>(y * W + x)] - my;
                    vx += dx * dx;
                    vy += dy * dy;
                    cov += dx * dy;
                }
            vx /= 64.0;
            vy /= 64.0;
            cov /= 64.0;
            total += ((2.0 * mx * my + 1e-4) * (2.0 * cov + 9e-4)) /
                     ((mx * mx + my * my + 1e-4) * (vx + vy + 9e-4));
            ++count;
        }
    return total / count;
}

Tensor rand_image3(Rng& rng, int h, int w) {
    Tensor t = Tensor::zeros({h, w, 3});
    for (double& v : t.data) v = rng.uniform(0.0, 1.0);
    return t;
}

} // namespace

TEST_CASE("parameter mse matches a double-loop oracle", "[metrics]") {
    Rng rng(701);
    const Tensor m = rand_mat(rng, 12, 28, 0.0, 1.0);

    SECTION("identity and unit offset") {
        CHECK(metrics::mse_params(m, m) == 0.0);
        Tensor shifted = m;
        for (double& v : shifted.data) v += 1.0;
        CHECK(std::abs(metrics::mse_params(m, shifted) - 1.0) < 1e-12);
    }

    SECTION("random pair") {
        const Tensor mh = rand_mat(rng, 12, 28, 0.0, 1.0);
        double expect = 0.0;
        for (int t = 0; t < 12; ++t)
            for (int j = 0; j < 28; ++j)
                expect += (m.at(t, j) - mh.at(t, j)) * (m.at(t, j) - mh.at(t, j));
        expect /= 12.0 * 28.0;
        CHECK(std::abs(metrics::mse_params(m, mh) - expect) < 1e-12);
        CHECK(metrics::mse_params(m, mh) == metrics::mse_params(mh, m));
    }

    SECTION("shape mismatches are rejected") {
        CHECK_THROWS_AS(metrics::mse_params(m, rand_mat(rng, 12, 27, 0.0, 1.0)),
                        std::invalid_argument);
        CHECK_THROWS_AS(metrics::mse_params(Tensor::zeros({0, 28}), Tensor::zeros({0, 28})),
                        std::invalid_argument);
    }
}

TEST_CASE("lip landmark distance works on the mesh without pose", "[metrics]") {
    Rng rng(702);
    const face::FaceModel model = face::synth_face_model(11, 120);
    std::vector<double> s(60);
    for (double& v : s) v = 0.1 * rng.normal();
    const Tensor up = rand_mat(rng, 5, 23, 0.0, 0.5);
    const Tensor mr = rand_mat(rng, 5, 28, 0.0, 0.8);

    SECTION("equal mouth sequences give zero") {
        CHECK(metrics::lmd_3d(model, s, mr, mr, up) == 0.0);
    }

    SECTION("random pair matches the brute-force oracle and is symmetric") {
        const Tensor mh = rand_mat(rng, 5, 28, 0.0, 0.8);
        const double got = metrics::lmd_3d(model, s, mr, mh, up);
        CHECK(got > 0.0);
        CHECK(std::abs(got - lmd_oracle(model, s, mr, mh, up)) < 1e-12);
        CHECK(metrics::lmd_3d(model, s, mh, mr, up) == got);
    }

    SECTION("a blendshape with no lip support cannot move the metric") {
        face::FaceModel tiny;
        const int N = 70;
        tiny.mean = rand_mat(rng, N, 3, -1.0, 1.0);
        tiny.shape_basis = Tensor::zeros({60, N, 3});
        tiny.expr_basis = Tensor::zeros({51, N, 3});
        for (int i = 0; i < 68; ++i) tiny.landmarks.push_back(i);
        for (int vi = 0; vi < N; ++vi) {
            const bool lip_vertex = vi >= 48 && vi < 68;
            if (!lip_vertex)
                for (int c = 0; c < 3; ++c) tiny.expr_basis.at(23 + 5, vi, c) = rng.normal();
        }
        Tensor mh = mr;
        for (int t = 0; t < 5; ++t) mh.at(t, 5) += 0.7;
        CHECK(metrics::lmd_3d(tiny, std::vector<double>(60, 0.0), mr, mh, up) == 0.0);
    }

    SECTION("dimension mismatches are rejected") {
        CHECK_THROWS_AS(metrics::lmd_3d(model, s, mr, rand_mat(rng, 5, 27, 0.0, 1.0), up),
                        std::invalid_argument);
        CHECK_THROWS_AS(metrics::lmd_3d(model, s, mr, rand_mat(rng, 4, 28, 0.0, 1.0), up),
                        std::invalid_argument);
        CHECK_THROWS_AS(metrics::lmd_3d(model, s, mr, mr, rand_mat(rng, 5, 22, 0.0, 1.0)),
                        std::invalid_argument);
        CHECK_THROWS_AS(metrics::lmd_3d(model, std::vector<double>(59, 0.0), mr, mr, up),
                        std::invalid_argument);
    }
}

TEST_CASE("parameter ssim complements the training loss", "[metrics]") {
    Rng rng(703);

    SECTION("equal sequences score one") {
        const Tensor m = rand_mat(rng, 9, 23, 0.0, 1.0);
        CHECK(std::abs(metrics::ssim_param_metric(m, m) - 1.0) < 1e-15);
    }

    SECTION("an anti-correlated zero-mean pair matches the closed form") {
        Tensor a = Tensor::zeros({8, 1});
        for (int t = 0; t < 8; ++t) a.at(t, 0) = (t % 2 == 0) ? 0.1 : -0.1;
        Tensor b = a;
        for (double& v : b.data) v = -v;
        const double expect = (-0.02 + 9e-4) / (0.02 + 9e-4);
        CHECK(std::abs(metrics::ssim_param_metric(a, b) - expect) < 1e-12);
    }

    SECTION("random pairs stay within [-1, 1] and match the oracle") {
        for (int k = 0; k < 20; ++k) {
            const Tensor a = rand_mat(rng, 11, 6, -1.0, 1.0);
            const Tensor b = rand_mat(rng, 11, 6, -1.0, 1.0);
            const double v = metrics::ssim_param_metric(a, b);
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
            CHECK(std::abs(v - oracle::ssim_seq(a, b, 1e-4, 9e-4)) < 1e-12);
        }
    }
}

TEST_CASE("image ssim matches a naive windowed oracle", "[metrics]") {
    Rng rng(704);

    SECTION("identical images score one") {
        const Tensor img = rand_image3(rng, 16, 16);
        CHECK(std::abs(metrics::ssim_image(img, img) - 1.0) < 1e-12);
    }

    SECTION("an inverted mid-gray checkerboard matches the closed form") {
        Tensor img = Tensor::zeros({8, 8, 3});
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) = 0.5 + ((x + y) % 2 == 0 ? 0.1 : -0.1);
        Tensor inv = img;
        for (double& v : inv.data) v = 1.0 - v;
        const double expect = (-0.02 + 9e-4) / (0.02 + 9e-4);
        CHECK(std::abs(metrics::ssim_image(img, inv) - expect) < 1e-12);
    }

    SECTION("multi-window images match the oracle and are symmetric") {
        const Tensor a = rand_image3(rng, 16, 24);
        const Tensor b = rand_image3(rng, 16, 24);
        const double got = metrics::ssim_image(a, b);
        CHECK(std::abs(got - ssim_image_oracle(a, b)) < 1e-9);
        CHECK(metrics::ssim_image(b, a) == got);
        const Tensor c = rand_image3(rng, 19, 27);
        CHECK(std::abs(metrics::ssim_image(c, c) - 1.0) < 1e-12);
    }

    SECTION("bad shapes are rejected") {
        const Tensor img = rand_image3(rng, 16, 16);
        CHECK_THROWS_AS(metrics::ssim_image(img, rand_image3(rng, 16, 8)), std::invalid_argument);
        CHECK_THROWS_AS(metrics::ssim_image(rand_image3(rng, 7, 16), rand_image3(rng, 7, 16)),
                        std::invalid_argument);
        CHECK_THROWS_AS(metrics::ssim_image(Tensor::zeros({16, 16, 1}), Tensor::zeros({16, 16, 1})),
                        std::invalid_argument);
    }
}
