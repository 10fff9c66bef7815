/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: tests/test_render.cpp
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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "tth/nn/gradcheck.hpp"
#include "tth/render/losses.hpp"
#include "tth/render/nets.hpp"
#include "tth/render/perceptual.hpp"
#include "tth/render/train.hpp"
#include "tth/render/volume.hpp"

using namespace tth;
using tth::common::Rng;
using tth::nn::Tensor;

namespace {

bool same_params(const nn::ParamStore& a, const nn::ParamStore& b) {
    if (a.count() != b.count()) return false;
    auto ia = a.items().begin();
    auto ib = b.items().begin();
    for (; ia != a.items().end(); ++ia, ++ib) {
        if (ia->first != ib->first) return false;
        if (ia->second.shape != ib->second.shape) return false;
        for (std::size_t i = 0; i < ia->second.data.size(); ++i)
            if (ia->second.data[i] != ib->second.data[i]) return false;
    }
    return true;
}

Tensor rand_image(Rng& rng, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
    Tensor t = Tensor::zeros({h, w, c});
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Channel block f of a volume compared against one source frame, bitwise.
bool block_equals(const render::Volume& v, int f, const Tensor& img) {
    const int C = img.dim(2);
    for (int y = 0; y < img.dim(0); ++y)
        for (int x = 0; x < img.dim(1); ++x)
            for (int c = 0; c < C; ++c)
                if (v.data.at(y, x, f * C + c) != img.at(y, x, c)) return false;
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

/// Identity pyramid: one 1x1 stride-1 stage passing 3 channels through.
render::FeaturePyramid identity_pyramid() {
    render::FeaturePyramid p;
    Tensor w = Tensor::zeros({1, 1, 3, 3});
    for (int c = 0; c < 3; ++c) w.data[static_cast<std::size_t>(c * 3 + c)] = 1.0;
    p.w.push_back(w);
    p.b.push_back(Tensor::zeros({3}));
    p.stride.push_back(1);
    return p;
}

} // namespace

TEST_CASE("space-time volumes clamp at the edges and slide one frame", "[render]") {
    Rng rng(901);

    SECTION("a single frame fills all fifteen slots") {
        const Tensor img = rand_image(rng, 6, 5, 3);
        const render::Volume v = render::build_volume(std::vector<Tensor>{img}, 0);
        v.validate();
        REQUIRE(v.data.shape == std::vector<int>{6, 5, 45});
        for (int f = 0; f < render::kVolumeWindow; ++f) CHECK(block_equals(v, f, img));
    }

    SECTION("an interior frame sees its centered window in order") {
        std::vector<Tensor> images;
        for (int i = 0; i < 15; ++i) images.push_back(rand_image(rng, 4, 4, 2));
        const render::Volume v = render::build_volume(images, 7);
        REQUIRE(v.data.shape == std::vector<int>{4, 4, 30});
        for (int f = 0; f < 15; ++f) CHECK(block_equals(v, f, images[static_cast<std::size_t>(f)]));
    }

    SECTION("consecutive interior volumes share fourteen blocks") {
        std::vector<Tensor> images;
        for (int i = 0; i < 30; ++i) images.push_back(rand_image(rng, 4, 3, 1));
        const render::Volume a = render::build_volume(images, 12);
        const render::Volume b = render::build_volume(images, 13);
        for (int f = 0; f < 14; ++f)
            CHECK(block_equals(a, f + 1, images[static_cast<std::size_t>(6 + f)]));
        for (int f = 0; f < 14; ++f)
            CHECK(block_equals(b, f, images[static_cast<std::size_t>(6 + f)]));
    }

    SECTION("early and late frames clamp to the sequence ends") {
        std::vector<Tensor> images;
        for (int i = 0; i < 5; ++i) images.push_back(rand_image(rng, 4, 4, 1));
        const render::Volume v = render::build_volume(images, 0);
        for (int f = 0; f <= render::kVolumeRadius; ++f) CHECK(block_equals(v, f, images[0]));
        for (int f = 11; f < 15; ++f) CHECK(block_equals(v, f, images[4]));
        const render::Volume w = render::build_volume(images, 4);
        for (int f = render::kVolumeRadius; f < 15; ++f) CHECK(block_equals(w, f, images[4]));
    }

    SECTION("landmark frames build the same volume as their images") {
        std::vector<Tensor> images;
        std::vector<face::LandmarkFrame> frames;
        for (int i = 0; i < 4; ++i) {
            images.push_back(rand_image(rng, 4, 4, 3));
            frames.push_back(face::LandmarkFrame{images.back(), Tensor::zeros({68, 2})});
        }
        const render::Volume a = render::build_volume(images, 2);
        const render::Volume b = render::build_volume(frames, 2);
        CHECK(max_abs_diff(a.data, b.data) == 0.0);
    }

    SECTION("bad sequences are rejected") {
        CHECK_THROWS_AS(render::build_volume(std::vector<Tensor>{}, 0), std::invalid_argument);
        const Tensor img = rand_image(rng, 4, 4, 1);
        CHECK_THROWS_AS(render::build_volume(std::vector<Tensor>{img}, -1), std::invalid_argument);
        CHECK_THROWS_AS(render::build_volume(std::vector<Tensor>{img}, 1), std::invalid_argument);
        const std::vector<Tensor> mixed{img, rand_image(rng, 4, 5, 1)};
        CHECK_THROWS_AS(render::build_volume(mixed, 0), std::invalid_argument);
        render::Volume v;
        v.data = Tensor::zeros({4, 4, 16});
        CHECK_THROWS_AS(v.validate(), std::invalid_argument);
    }
}

TEST_CASE("perceptual pyramid features match a naive convolution oracle", "[render]") {
    Rng rng(902);

    SECTION("construction is seeded and validated") {
        const render::FeaturePyramid a = render::FeaturePyramid::make(5, 3, 3, 4);
        const render::FeaturePyramid b = render::FeaturePyramid::make(5, 3, 3, 4);
        const render::FeaturePyramid c = render::FeaturePyramid::make(6, 3, 3, 4);
        REQUIRE(a.stages() == 3);
        a.validate();
        CHECK(max_abs_diff(a.w[1], b.w[1]) == 0.0);
        CHECK(max_abs_diff(a.w[1], c.w[1]) > 0.0);
        CHECK(a.w[0].shape == std::vector<int>{3, 3, 3, 4});
        CHECK(a.w[1].shape == std::vector<int>{3, 3, 4, 8});
        CHECK(a.w[2].shape == std::vector<int>{3, 3, 8, 16});

        render::FeaturePyramid bad = a;
        bad.stride[1] = 0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = a;
        bad.w[2] = Tensor::zeros({3, 3, 5, 16});
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = a;
        bad.b.pop_back();
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        CHECK_THROWS_AS(render::FeaturePyramid{}.validate(), std::invalid_argument);
    }

    SECTION("identical images give exactly zero loss") {
        const render::FeaturePyramid pyr = render::FeaturePyramid::make(7, 3, 2, 4);
        const Tensor img = rand_image(rng, 8, 8, 3);
        CHECK(render::loss_perceptual(pyr, img, img) == 0.0);
    }

    SECTION("an identity stage reduces to the normalized pixel difference") {
        const render::FeaturePyramid pyr = identity_pyramid();
        const Tensor a = rand_image(rng, 8, 6, 3);
        const Tensor b = rand_image(rng, 8, 6, 3);
        double l1 = 0.0;
        for (std::size_t i = 0; i < a.data.size(); ++i) l1 += std::abs(a.data[i] - b.data[i]);
        l1 /= static_cast<double>(a.data.size());
        CHECK(std::abs(render::loss_perceptual(pyr, a, b) - l1) < 1e-15);
    }

    SECTION("stage sums match an independent convolution chain") {
        const render::FeaturePyramid pyr = render::FeaturePyramid::make(9, 3, 2, 4);
        const Tensor a = rand_image(rng, 8, 8, 3, -1.0, 1.0);
        const Tensor b = rand_image(rng, 8, 8, 3, -1.0, 1.0);
        double expect = 0.0;
        Tensor xa = a, xb = b;
        for (int i = 0; i < pyr.stages(); ++i) {
            const std::size_t s = static_cast<std::size_t>(i);
            const Tensor fa = oracle::conv2d(xa, pyr.w[s], pyr.b[s], pyr.stride[s]);
            const Tensor fb = oracle::conv2d(xb, pyr.w[s], pyr.b[s], pyr.stride[s]);
            double term = 0.0;
            for (std::size_t j = 0; j < fa.data.size(); ++j)
                term += std::abs(fa.data[j] - fb.data[j]);
            expect += term / static_cast<double>(fa.data.size());
            xa = fa;
            xb = fb;
            for (double& v : xa.data) v = std::max(v, 0.0);
            for (double& v : xb.data) v = std::max(v, 0.0);
        }
        CHECK(std::abs(render::loss_perceptual(pyr, a, b) - expect) < 1e-12);
    }

    SECTION("channel mismatches are rejected") {
        const render::FeaturePyramid pyr = render::FeaturePyramid::make(7, 3, 2, 4);
        const Tensor a = rand_image(rng, 8, 8, 4);
        CHECK_THROWS_AS(render::loss_perceptual(pyr, a, a), std::invalid_argument);
        const Tensor b = rand_image(rng, 8, 8, 3);
        const Tensor c = rand_image(rng, 8, 4, 3);
        CHECK_THROWS_AS(render::loss_perceptual(pyr, b, c), std::invalid_argument);
    }
}

TEST_CASE("renderer outputs ranged heads and a convex fusion", "[render]") {
    Rng rng(903);
    const render::RendererNets nets = render::RendererNets::make(11, {4}, 15);
    std::vector<Tensor> images;
    for (int i = 0; i < 3; ++i) images.push_back(rand_image(rng, 16, 16, 1));
    const render::Volume v = render::build_volume(images, 1);

    SECTION("construction is seeded and validated") {
        const render::RendererNets again = render::RendererNets::make(11, {4}, 15);
        CHECK(same_params(nets.params, again.params));
        const render::RendererNets other = render::RendererNets::make(12, {4}, 15);
        CHECK_FALSE(same_params(nets.params, other.params));
        CHECK(nets.params.has("rend.shared.r3.c2.w"));
        CHECK(nets.params.has("rend.clr.up.w"));
        CHECK_THROWS_AS(render::RendererNets::make(1, {0}, 15), std::invalid_argument);
    }

    SECTION("head shapes, ranges and the fusion identity hold") {
        const render::RenderOut out = render::render_frame(nets, v);
        REQUIRE(out.face.shape == std::vector<int>{16, 16, 3});
        REQUIRE(out.color.shape == std::vector<int>{16, 16, 3});
        REQUIRE(out.mask.shape == std::vector<int>{16, 16, 1});
        REQUIRE(out.fused.shape == std::vector<int>{16, 16, 3});
        for (double m : out.mask.data) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0);
        }
        for (double f : out.face.data) CHECK(std::abs(f) <= 1.0);
        for (double c : out.color.data) CHECK(std::abs(c) <= 1.0);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const double m = out.mask.at(y, x, 0);
                for (int c = 0; c < 3; ++c) {
                    const double f = out.face.at(y, x, c);
                    const double cl = out.color.at(y, x, c);
                    const double expect = f * m + cl * (1.0 + -1.0 * m);
                    CHECK(out.fused.at(y, x, c) == expect);
                    const double lo = std::min(f, cl), hi = std::max(f, cl);
                    CHECK(out.fused.at(y, x, c) >= lo - 1e-15);
                    CHECK(out.fused.at(y, x, c) <= hi + 1e-15);
                }
            }
        const render::RenderOut again = render::render_frame(nets, v);
        CHECK(max_abs_diff(out.fused, again.fused) == 0.0);
    }

    SECTION("a saturated mask selects one pathway") {
        render::RendererNets forced = nets;
        Tensor& mw = forced.params.get("rend.mask.out.w");
        for (double& x : mw.data) x = 0.0;
        forced.params.get("rend.mask.out.b").data[0] = 50.0;
        render::RenderOut out = render::render_frame(forced, v);
        for (double m : out.mask.data) CHECK(m == 1.0);
        for (std::size_t i = 0; i < out.fused.data.size(); ++i)
            CHECK(out.fused.data[i] == out.face.data[i]);

        forced.params.get("rend.mask.out.b").data[0] = -50.0;
        out = render::render_frame(forced, v);
        CHECK(max_abs_diff(out.fused, out.color) < 1e-15);
    }

    SECTION("bad volumes are rejected") {
        render::Volume odd;
        odd.data = Tensor::zeros({15, 16, 15});
        CHECK_THROWS_AS(render::render_frame(nets, odd), std::invalid_argument);
        render::Volume wide;
        wide.data = Tensor::zeros({16, 16, 30});
        CHECK_THROWS_AS(render::render_frame(nets, wide), std::invalid_argument);
    }
}

TEST_CASE("discriminator trunk shares weights across three scales", "[render]") {
    Rng rng(904);
    const render::VidDisc disc = render::VidDisc::make(21, {4}, 18);
    const Tensor img = rand_image(rng, 16, 16, 3, -1.0, 1.0);
    const Tensor vol = rand_image(rng, 16, 16, 15);

    SECTION("patch maps shrink by powers of two") {
        nn::Tape t;
        const nn::ConstBinding P(t, disc.params);
        const auto patches = render::disc_nodes(t, P, t.constant(img), t.constant(vol));
        CHECK(t.val(patches[0]).shape == std::vector<int>{4, 4, 1});
        CHECK(t.val(patches[1]).shape == std::vector<int>{2, 2, 1});
        CHECK(t.val(patches[2]).shape == std::vector<int>{1, 1, 1});
    }

    SECTION("the coarse scale equals the trunk on pooled inputs") {
        nn::Tape t;
        const nn::ConstBinding P(t, disc.params);
        const auto patches = render::disc_nodes(t, P, t.constant(img), t.constant(vol));
        const Tensor img2 = t.val(t.avgpool2d(t.constant(img), 2));
        const Tensor vol2 = t.val(t.avgpool2d(t.constant(vol), 2));
        nn::Tape t2;
        const nn::ConstBinding P2(t2, disc.params);
        const auto pooled = render::disc_nodes(t2, P2, t2.constant(img2), t2.constant(vol2));
        CHECK(max_abs_diff(t.val(patches[1]), t2.val(pooled[0])) == 0.0);
    }

    SECTION("size constraints are enforced") {
        nn::Tape t;
        const nn::ConstBinding P(t, disc.params);
        const int img14 = t.constant(Tensor::zeros({14, 16, 3}));
        const int vol14 = t.constant(Tensor::zeros({14, 16, 15}));
        CHECK_THROWS_AS(render::disc_nodes(t, P, img14, vol14), std::invalid_argument);
        const int volBad = t.constant(Tensor::zeros({16, 12, 15}));
        CHECK_THROWS_AS(render::disc_nodes(t, P, t.constant(img), volBad), std::invalid_argument);
        CHECK_THROWS_AS(render::VidDisc::make(2, {0}, 18), std::invalid_argument);
    }
}

TEST_CASE("video loss components sum to the weighted total", "[render]") {
    Rng rng(905);
    const render::FeaturePyramid pyr = render::FeaturePyramid::make(31, 3, 2, 4);
    const render::RendererNets nets = render::RendererNets::make(32, {4}, 15);
    const render::VidDisc disc = render::VidDisc::make(33, {4}, 18);
    std::vector<Tensor> images;
    for (int i = 0; i < 4; ++i) images.push_back(rand_image(rng, 16, 16, 1));
    const render::Volume v = render::build_volume(images, 2);
    const render::RenderOut out = render::render_frame(nets, v);
    const Tensor real = rand_image(rng, 16, 16, 3, -1.0, 1.0);
    const render::CropBox box{4, 5, 8, 6};
    const render::VidLossWeights w{};

    SECTION("the total recombines the weighted parts") {
        const render::VidLossComponents c = render::loss_video(pyr, disc, out, real, v, box, w);
        CHECK(c.perc > 0.0);
        CHECK(c.l1_img > 0.0);
        CHECK(c.l1_face > 0.0);
        const double recombined = w.alpha * c.perc + w.beta * c.l1_img + w.gamma * c.l1_face +
                                  w.adv * (c.adv[0] + c.adv[1] + c.adv[2]);
        CHECK(std::abs(c.total - recombined) < 1e-12 * std::max(1.0, std::abs(c.total)));
    }

    SECTION("a perfect reconstruction leaves only the adversarial terms") {
        render::RenderOut perfect = out;
        perfect.fused = real;
        perfect.face = real;
        const render::VidLossComponents c = render::loss_video(pyr, disc, perfect, real, v, box, w);
        CHECK(c.perc == 0.0);
        CHECK(c.l1_img == 0.0);
        CHECK(c.l1_face == 0.0);
        CHECK(c.total == (c.adv[0] + c.adv[1]) + c.adv[2]);
    }

    SECTION("zero reconstruction weights leave the adversarial sum") {
        const render::VidLossWeights adv_only{0.0, 0.0, 0.0, 1.0};
        const render::VidLossComponents c =
            render::loss_video(pyr, disc, out, real, v, box, adv_only);
        CHECK(c.total == (c.adv[0] + c.adv[1]) + c.adv[2]);
    }

    SECTION("independent recomputation matches each component") {
        const render::VidLossComponents c = render::loss_video(pyr, disc, out, real, v, box, w);
        CHECK(std::abs(c.perc - render::loss_perceptual(pyr, real, out.fused)) < 1e-13);
        double l1 = 0.0;
        for (std::size_t i = 0; i < real.data.size(); ++i)
            l1 += std::abs(real.data[i] - out.fused.data[i]);
        CHECK(std::abs(c.l1_img - l1 / static_cast<double>(real.data.size())) < 1e-13);
        double lf = 0.0;
        for (int y = 0; y < box.h; ++y)
            for (int x = 0; x < box.w; ++x)
                for (int ch = 0; ch < 3; ++ch)
                    lf += std::abs(real.at(box.y0 + y, box.x0 + x, ch) -
                                   out.face.at(box.y0 + y, box.x0 + x, ch));
        CHECK(std::abs(c.l1_face - lf / static_cast<double>(box.h * box.w * 3)) < 1e-13);
    }

    SECTION("degenerate boxes and weights are rejected") {
        const render::CropBox flat{4, 4, 0, 8};
        const render::CropBox outside{12, 4, 8, 8};
        const render::VidLossWeights negw{-1.0, 100.0, 100.0, 1.0};
        CHECK_THROWS_AS(render::loss_video(pyr, disc, out, real, v, flat, w),
                        std::invalid_argument);
        CHECK_THROWS_AS(render::loss_video(pyr, disc, out, real, v, outside, w),
                        std::invalid_argument);
        CHECK_THROWS_AS(render::loss_video(pyr, disc, out, real, v, box, negw),
                        std::invalid_argument);
        const Tensor thin = rand_image(rng, 16, 16, 1);
        CHECK_THROWS_AS(render::loss_video(pyr, disc, out, thin, v, box, w),
                        std::invalid_argument);
    }
}

TEST_CASE("renderer and critic pass the finite-difference gradient check", "[render]") {
    Rng rng(906);
    render::RendererNets nets = render::RendererNets::make(41, {2}, 15);
    render::VidDisc disc = render::VidDisc::make(42, {2}, 18);
    const render::FeaturePyramid pyr = render::FeaturePyramid::make(43, 3, 2, 2);
    std::vector<Tensor> images;
    for (int i = 0; i < 3; ++i) images.push_back(rand_image(rng, 16, 16, 1));
    const render::Volume v = render::build_volume(images, 1);
    const Tensor real = rand_image(rng, 16, 16, 3, -1.0, 1.0);
    const render::CropBox box{4, 4, 8, 8};
    const render::VidLossWeights w{};

    SECTION("generator gradients through the full video loss") {
        auto loss_fn = [&](const nn::ParamStore& p) {
            nn::Tape t;
            const nn::ConstBinding PG(t, p);
            const nn::ConstBinding PD(t, disc.params);
            const render::RenderNodes r = render::render_nodes(t, PG, t.constant(v.data));
            const render::VidLossNodes n =
                render::loss_video_nodes(t, pyr, PD, r, t.constant(real), t.constant(v.data), box, w);
            return t.val(n.total).data[0];
        };
        nn::Tape t;
        const nn::TapeBinding PG(t, nets.params);
        const nn::ConstBinding PD(t, disc.params);
        const render::RenderNodes r = render::render_nodes(t, PG, t.constant(v.data));
        const render::VidLossNodes n =
            render::loss_video_nodes(t, pyr, PD, r, t.constant(real), t.constant(v.data), box, w);
        t.backward_scalar(n.total);
        const auto res = nn::grad_check(nets.params, loss_fn, PG.collect_grads(), 1e-5, 8);
        INFO("worst " << res.worst_param << "[" << res.worst_index << "] analytic " << res.analytic
                      << " numeric " << res.numeric);
        CHECK(res.max_rel_err < 1e-4);
    }

    SECTION("critic gradients through the two-sided objective") {
        const render::RenderOut out = render::render_frame(nets, v);
        auto loss_fn = [&](const nn::ParamStore& p) {
            nn::Tape t;
            const nn::ConstBinding PD(t, p);
            const int loss = render::disc_loss_nodes(t, PD, t.constant(real),
                                                     t.constant(out.fused), t.constant(v.data));
            return t.val(loss).data[0];
        };
        nn::Tape t;
        const nn::TapeBinding PD(t, disc.params);
        const int loss = render::disc_loss_nodes(t, PD, t.constant(real), t.constant(out.fused),
                                                 t.constant(v.data));
        t.backward_scalar(loss);
        const auto res = nn::grad_check(disc.params, loss_fn, PD.collect_grads(), 1e-5, 16);
        INFO("worst " << res.worst_param << "[" << res.worst_index << "] analytic " << res.analytic
                      << " numeric " << res.numeric);
        CHECK(res.max_rel_err < 1e-4);
    }
}

TEST_CASE("short renderer training is deterministic and shrinks the overfit loss", "[render]") {
    Rng rng(907);
    std::vector<Tensor> images;
    for (int i = 0; i < 4; ++i) images.push_back(rand_image(rng, 16, 16, 1));
    std::vector<render::RenderSample> data;
    for (int i = 0; i < 4; ++i) {
        render::RenderSample s;
        s.volume = render::build_volume(images, i);
        s.target = rand_image(rng, 16, 16, 3, -0.5, 0.5);
        s.box = render::CropBox{4, 4, 8, 8};
        data.push_back(s);
    }
    const render::FeaturePyramid pyr = render::FeaturePyramid::make(51, 3, 2, 4);

    SECTION("the schedule interpolates the learning rate") {
        render::RenderTrainConfig cfg;
        cfg.epochs = 5;
        CHECK(render::render_lr(cfg, 0) == 2e-4);
        CHECK(render::render_lr(cfg, 4) == 1e-4);
        CHECK(std::abs(render::render_lr(cfg, 2) - 1.5e-4) < 1e-18);
    }

    SECTION("training is bitwise reproducible and reduces the image term") {
        render::RenderTrainConfig cfg;
        cfg.epochs = 12;
        cfg.batch_size = 2;
        cfg.lr0 = 1e-3;
        cfg.lr1 = 5e-4;
        cfg.seed = 61;

        render::RendererNets nets = render::RendererNets::make(52, {4}, 15);
        render::VidDisc disc = render::VidDisc::make(53, {4}, 18);
        render::RendererNets nets2 = nets;
        render::VidDisc disc2 = disc;

        const auto curve = render::train_renderer(nets, disc, pyr, data, cfg);
        REQUIRE(curve.size() == 12);
        const auto curve2 = render::train_renderer(nets2, disc2, pyr, data, cfg);
        CHECK(same_params(nets.params, nets2.params));
        CHECK(same_params(disc.params, disc2.params));
        for (std::size_t i = 0; i < curve.size(); ++i) {
            CHECK(curve[i].g_total == curve2[i].g_total);
            CHECK(curve[i].d_loss == curve2[i].d_loss);
        }
        CHECK(curve.back().g_l1_img < curve.front().g_l1_img);
        CHECK(nets.params.all_finite());
        CHECK(disc.params.all_finite());
    }

    SECTION("zero epochs leave the nets untouched") {
        render::RenderTrainConfig cfg;
        cfg.epochs = 0;
        render::RendererNets nets = render::RendererNets::make(52, {4}, 15);
        render::VidDisc disc = render::VidDisc::make(53, {4}, 18);
        const render::RendererNets before = nets;
        const auto curve = render::train_renderer(nets, disc, pyr, data, cfg);
        CHECK(curve.empty());
        CHECK(same_params(nets.params, before.params));
    }

    SECTION("bad datasets and configs are rejected") {
        render::RendererNets nets = render::RendererNets::make(52, {4}, 15);
        render::VidDisc disc = render::VidDisc::make(53, {4}, 18);
        render::RenderTrainConfig cfg;
        cfg.epochs = 1;
        CHECK_THROWS_AS(render::train_renderer(nets, disc, pyr, {}, cfg), std::invalid_argument);
        render::RenderTrainConfig neg = cfg;
        neg.epochs = -1;
        CHECK_THROWS_AS(render::train_renderer(nets, disc, pyr, data, neg),
                        std::invalid_argument);
        render::RenderTrainConfig zerob = cfg;
        zerob.batch_size = 0;
        CHECK_THROWS_AS(render::train_renderer(nets, disc, pyr, data, zerob),
                        std::invalid_argument);
        auto broken = data;
        broken[1].target = Tensor::zeros({16, 16, 1});
        CHECK_THROWS_AS(render::train_renderer(nets, disc, pyr, broken, cfg),
                        std::invalid_argument);
        broken = data;
        broken[2].box = render::CropBox{14, 4, 8, 8};
        CHECK_THROWS_AS(render::train_renderer(nets, disc, pyr, broken, cfg),
                        std::invalid_argument);
    }
}
