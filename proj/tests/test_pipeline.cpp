/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: tests/test_pipeline.cpp
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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tth/pipeline/pipeline.hpp"

namespace fs = std::filesystem;
using tth::nn::Tensor;
using tth::pipeline::Config;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

int count_files(const fs::path& dir) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        (void)e;
        ++n;
    }
    return n;
}

/// Landmark cloud with integer eye and mouth centroids at known spots.
Tensor fixture_points() {
    Tensor pts = Tensor::zeros({68, 2});
    for (int i = 0; i < 36; ++i) {
        pts.at(i, 0) = 12.0 + 40.0 * (i % 6) / 5.0;
        pts.at(i, 1) = 10.0 + 44.0 * (i / 6) / 5.0;
    }
    for (int i = 36; i < 42; ++i) {
        pts.at(i, 0) = 22.0;
        pts.at(i, 1) = 24.0;
    }
    for (int i = 42; i < 48; ++i) {
        pts.at(i, 0) = 42.0;
        pts.at(i, 1) = 24.0;
    }
    for (int i = 48; i < 68; ++i) {
        pts.at(i, 0) = 32.0;
        pts.at(i, 1) = 44.0;
    }
    return pts;
}

const char* kTinyConfig = R"(
# compressed schedules for a smoke run
data.utterances = 4
data.fps = 5
speaker.utterances = 1
anim.mouth.epochs_fixed = 2
anim.mouth.epochs_decay = 2
anim.encdec.epochs_fixed = 2
anim.encdec.epochs_decay = 2
anim.batch = 2
anim.mouth.channels = 8
anim.mouth.blocks = 2
anim.encdec.channels = 8
anim.disc.channels = 8
fit.keyframes = 5
fit.iterations = 60
fit.seq_iterations = 12
style.hidden = 16
style.batch = 64
style.epochs1 = 40
style.epochs2 = 20
style.epochs3 = 10
render.size = 64
render.channels = 4
render.disc.channels = 4
render.pyramid.stages = 2
render.pyramid.channels = 4
render.epochs = 2
render.batch = 2
render.frames = 2
generate.frames = 4
)";

} // namespace

TEST_CASE("config parses overrides and rejects malformed input", "[pipeline]") {
    SECTION("defaults cover every key") {
        const Config cfg;
        CHECK(cfg.values().size() == 42);
        CHECK(cfg.get_int("data.fps") == 30);
        CHECK(cfg.get_int("anim.mouth.epochs_fixed") == 400);
        CHECK(cfg.get_int("anim.encdec.epochs_fixed") == 50);
        CHECK(cfg.get_double("anim.g_lr") == 5e-4);
        CHECK(cfg.get_double("anim.d_lr") == 1e-5);
        CHECK(cfg.get_double("anim.lambda.mouth") == 50.0);
        CHECK(cfg.get_double("anim.lambda.upper") == 100.0);
        CHECK(cfg.get_double("render.alpha") == 10.0);
        CHECK(cfg.get_double("render.beta") == 100.0);
        CHECK(cfg.get_double("render.gamma") == 100.0);
        CHECK(cfg.get_int("render.epochs") == 50);
        CHECK(cfg.get_int("render.batch") == 3);
        CHECK(cfg.get_double("fit.lambda") == 1e-4);
        CHECK(cfg.get_int("generate.frames") == 90);
    }

    SECTION("overrides, comments and whitespace") {
        const Config cfg = Config::from_string(
            "# comment only line\n"
            "  data.fps   =  10   # trailing note\n"
            "\n"
            "anim.batch=4\n");
        CHECK(cfg.get_int("data.fps") == 10);
        CHECK(cfg.get_int("anim.batch") == 4);
        CHECK(cfg.get_int("data.utterances") == 12);
    }

    SECTION("malformed documents throw") {
        CHECK_THROWS_AS(Config::from_string("data.fps 10\n"), std::runtime_error);
        CHECK_THROWS_AS(Config::from_string("no.such.key = 1\n"), std::runtime_error);
        CHECK_THROWS_AS(Config::from_string("data.fps =\n"), std::runtime_error);
        CHECK_THROWS_AS(Config::from_string("data.fps = # gone\n"), std::runtime_error);
    }

    SECTION("typed getters validate") {
        Config cfg;
        CHECK_THROWS_AS(cfg.get_int("anim.g_lr"), std::runtime_error);
        CHECK_THROWS_AS(cfg.get_string("nope"), std::runtime_error);
        CHECK_THROWS_AS(cfg.set("nope", "1"), std::runtime_error);
        cfg.set("data.fps", "24");
        CHECK(cfg.get_int("data.fps") == 24);
        cfg.set("data.fps", "fast");
        CHECK_THROWS_AS(cfg.get_int("data.fps"), std::runtime_error);
        CHECK_THROWS_AS(cfg.get_double("data.fps"), std::runtime_error);
    }

    SECTION("file round trip") {
        const fs::path p = fs::temp_directory_path() / "tth_config_test.cfg";
        {
            std::ofstream f(p, std::ios::trunc);
            f << "render.size = 96\n";
        }
        CHECK(Config::from_file(p).get_int("render.size") == 96);
        fs::remove(p);
        CHECK_THROWS_AS(Config::from_file(p), std::runtime_error);
    }
}

TEST_CASE("watermark stamps the expected glyph bitmap", "[pipeline]") {
    const int H = 32, W = 64;
    Tensor img = Tensor::zeros({H, W, 3});
    for (double& v : img.data) v = 0.5;
    Tensor twin = img;
    tth::pipeline::stamp_watermark(img);
    tth::pipeline::stamp_watermark(twin);
    CHECK(img.data == twin.data);

    const std::string text = "SYNTHETIC";
    const int tw = static_cast<int>(text.size()) * 6 - 1;
    const int x0 = 2, y0 = H - 9;
    int lit = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double expect = 0.5;
            const bool in_strip = y >= y0 - 1 && y <= y0 + 7 && x >= x0 - 1 && x <= x0 + tw;
            if (in_strip) {
                expect = 0.0;
                const int gx = x - x0;
                if (y >= y0 && y < y0 + 7 && gx >= 0 && gx < tw && gx % 6 < 5) {
                    const auto rows = tth::pipeline::glyph_rows(text[static_cast<std::size_t>(gx / 6)]);
                    if (rows[static_cast<std::size_t>(y - y0)] >> (4 - gx % 6) & 1) expect = 1.0;
                }
            }
            if (expect == 1.0) ++lit;
            for (int c = 0; c < 3; ++c) REQUIRE(img.at(y, x, c) == expect);
        }
    CHECK(lit > 100);

    Tensor tiny = Tensor::zeros({16, 40, 3});
    CHECK_THROWS_AS(tth::pipeline::stamp_watermark(tiny), std::invalid_argument);
    Tensor gray = Tensor::zeros({64, 64});
    CHECK_THROWS_AS(tth::pipeline::stamp_watermark(gray), std::invalid_argument);
    Tensor ok = Tensor::zeros({64, 64, 3});
    CHECK_THROWS_AS(tth::pipeline::stamp_watermark(ok, "Z"), std::invalid_argument);
    CHECK_THROWS_AS(tth::pipeline::stamp_watermark(ok, ""), std::invalid_argument);
}

TEST_CASE("speaker style, crop boxes and procedural targets", "[pipeline]") {
    SECTION("articulation style is a clamped affine map") {
        Tensor m = Tensor::zeros({2, 3});
        m.at(0, 0) = 0.5;
        m.at(0, 1) = 0.0;
        m.at(0, 2) = 1.0;
        m.at(1, 0) = 1.5;
        m.at(1, 1) = -0.5;
        m.at(1, 2) = 0.2;
        const Tensor s = tth::pipeline::speaker_style(m);
        CHECK(s.at(0, 0) == 0.85 * 0.5 + 0.05);
        CHECK(s.at(0, 1) == 0.05);
        CHECK(s.at(0, 2) == 0.9);
        CHECK(s.at(1, 0) == 1.0);
        CHECK(s.at(1, 1) == 0.0);
        CHECK(s.at(1, 2) == 0.85 * 0.2 + 0.05);
    }

    SECTION("points_box bounds the landmark range") {
        const Tensor pts = fixture_points();
        const auto box = tth::pipeline::points_box(pts, 48, 68, 2, 64, 64);
        CHECK(box.y0 <= 44);
        CHECK(box.x0 <= 32);
        CHECK(box.y0 + box.h >= 45);
        CHECK(box.x0 + box.w >= 33);
        CHECK(box.y0 >= 0);
        CHECK(box.x0 >= 0);
        CHECK(box.y0 + box.h <= 64);
        CHECK(box.x0 + box.w <= 64);
        box.validate(64, 64);

        const auto clamped = tth::pipeline::points_box(pts, 0, 68, 30, 64, 64);
        CHECK(clamped.y0 == 0);
        CHECK(clamped.x0 == 0);
        CHECK(clamped.h == 64);
        CHECK(clamped.w == 64);
        CHECK_THROWS_AS(tth::pipeline::points_box(pts, 10, 10, 1, 64, 64),
                        std::invalid_argument);
        CHECK_THROWS_AS(tth::pipeline::points_box(pts, -1, 68, 1, 64, 64),
                        std::invalid_argument);
    }

    SECTION("generated tracks are sanitized before driving landmarks") {
        Tensor hed = Tensor::zeros({2, 6});
        hed.at(0, 5) = -4.0;
        hed.at(0, 0) = 3.0;
        hed.at(1, 5) = 2.5;
        hed.at(1, 3) = 0.1;
        const Tensor c = tth::pipeline::detail::clamp_pose_track(hed);
        CHECK(c.at(0, 5) == 1.8);
        CHECK(c.at(0, 0) == 0.6);
        CHECK(c.at(1, 5) == 2.5);
        CHECK(c.at(1, 3) == 0.1);
        const Tensor narrow = Tensor::zeros({2, 5});
        CHECK_THROWS_AS(tth::pipeline::detail::clamp_pose_track(narrow),
                        std::invalid_argument);

        Tensor upp = Tensor::zeros({1, 3});
        upp.at(0, 0) = -2.0;
        upp.at(0, 1) = 0.4;
        upp.at(0, 2) = 7.0;
        const Tensor cu = tth::pipeline::detail::clamp_unit_track(upp);
        CHECK(cu.at(0, 0) == 0.0);
        CHECK(cu.at(0, 1) == 0.4);
        CHECK(cu.at(0, 2) == 1.0);
    }

    SECTION("targets are deterministic, bounded and landmark-sensitive") {
        const Tensor pts = fixture_points();
        const Tensor a = tth::pipeline::speaker_target(pts, 64, 64);
        const Tensor b = tth::pipeline::speaker_target(pts, 64, 64);
        CHECK(a.data == b.data);
        CHECK(a.shape == std::vector<int>{64, 64, 3});
        for (double v : a.data) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }

        CHECK(std::abs(a.at(44, 32, 0) - 0.55) < 1e-12);
        CHECK(std::abs(a.at(44, 32, 1) - 0.12) < 1e-12);
        CHECK(std::abs(a.at(44, 32, 2) - 0.14) < 1e-12);
        CHECK(std::abs(a.at(24, 22, 0) - 0.08) < 1e-12);
        CHECK(std::abs(a.at(24, 22, 1) - 0.10) < 1e-12);
        CHECK(std::abs(a.at(24, 22, 2) - 0.16) < 1e-12);

        Tensor moved = pts;
        for (int i = 48; i < 68; ++i) moved.at(i, 1) += 6.0;
        const Tensor c = tth::pipeline::speaker_target(moved, 64, 64);
        CHECK(c.data != a.data);

        Tensor bad = pts;
        bad.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(tth::pipeline::speaker_target(bad, 64, 64), std::invalid_argument);
        const Tensor wrong = Tensor::zeros({67, 2});
        CHECK_THROWS_AS(tth::pipeline::speaker_target(wrong, 64, 64), std::invalid_argument);
        CHECK_THROWS_AS(tth::pipeline::speaker_target(pts, 8, 64), std::invalid_argument);
    }
}

TEST_CASE("pipeline end-to-end smoke run", "[pipeline]") {
    const Config cfg = Config::from_string(kTinyConfig);
    const std::uint64_t seed = 7;
    const fs::path dir = fs::temp_directory_path() / "tth_pipeline_smoke";
    fs::remove_all(dir);
    const tth::pipeline::Paths paths{dir};

    tth::pipeline::cmd_synth_data(cfg, seed, dir);
    CHECK(fs::exists(paths.corpus() / "vocab.json"));
    CHECK(fs::exists(paths.speaker_corpus() / "vocab.json"));
    CHECK(fs::exists(paths.truth_json()));
    const nlohmann::json lm = read_json(paths.landmarks_json());
    CHECK(lm.at("height").get<int>() == 64);
    CHECK(lm.at("utterances").size() == 1);
    const int speaker_frames = static_cast<int>(lm.at("utterances")[0].at("points").size());
    CHECK(speaker_frames >= 15);
    const auto targets = tth::io::Container::load(paths.targets());
    CHECK(static_cast<int>(targets.tensors.size()) == speaker_frames);
    CHECK(count_files(paths.speaker_frames()) == speaker_frames);

    for (const auto role : {tth::anim::AnimRole::Mouth, tth::anim::AnimRole::Upper,
                            tth::anim::AnimRole::Head}) {
        tth::pipeline::cmd_train_anim(cfg, seed, dir, role);
        CHECK(fs::exists(paths.anim_gen(role)));
        CHECK(fs::exists(paths.anim_disc(role)));
        CHECK(slurp(paths.anim_curves(role)).rfind("epoch,g_adv,g_rec,d_loss", 0) == 0);
    }

    tth::pipeline::cmd_fit_face(cfg, seed, dir);
    const nlohmann::json fit = read_json(paths.fit_json());
    CHECK(fit.at("s").size() == 60);
    CHECK(fit.at("keyframe_reprojection").get<double>() < 2.0);
    CHECK(fit.at("utterances")[0].at("expr").size() == static_cast<std::size_t>(speaker_frames));
    CHECK(fit.at("utterances")[0].at("reprojection").get<double>() < 2.0);

    tth::pipeline::cmd_train_style(cfg, seed, dir);
    CHECK(fs::exists(paths.style_ckpt()));
    const std::string style_csv = slurp(paths.style_curves());
    CHECK(style_csv.rfind("epoch,loss", 0) == 0);
    CHECK(std::count(style_csv.begin(), style_csv.end(), '\n') == 71);

    tth::pipeline::cmd_train_render(cfg, seed, dir);
    CHECK(fs::exists(paths.render_gen()));
    CHECK(fs::exists(paths.render_disc()));
    CHECK(slurp(paths.render_curves())
              .rfind("epoch,g_total,g_perc,g_l1_img,g_l1_face,g_adv,d_loss", 0) == 0);

    tth::pipeline::cmd_generate(cfg, seed, dir, "happiness", true);
    CHECK(count_files(paths.frames()) == 4);
    CHECK(count_files(paths.landmarks()) == 4);
    const nlohmann::json mou = read_json(paths.params() / "m_mou.json");
    const nlohmann::json upp = read_json(paths.params() / "m_upp.json");
    const nlohmann::json hed = read_json(paths.params() / "m_hed.json");
    CHECK(mou.size() == 4);
    CHECK(mou[0].size() == 28);
    CHECK(upp.size() == 4);
    CHECK(upp[0].size() == 23);
    CHECK(hed.size() == 4);
    CHECK(hed[0].size() == 6);
    const nlohmann::json lmk = read_json(paths.landmarks() / "frame_0002.json");
    CHECK(lmk.size() == 68);
    CHECK(lmk[0].size() == 2);
    const nlohmann::json report = read_json(paths.report_json());
    CHECK(report.at("frames").get<int>() == 4);
    CHECK(report.at("emotion").get<std::string>() == "happiness");
    CHECK(report.at("watermark").get<bool>());
    CHECK(report.at("fps").get<int>() == 5);

    std::vector<std::string> first;
    for (int t = 0; t < 4; ++t)
        first.push_back(slurp(paths.frames() / ("frame_000" + std::to_string(t) + ".png")));
    tth::pipeline::cmd_generate(cfg, seed, dir, "happiness", true);
    for (int t = 0; t < 4; ++t)
        REQUIRE(slurp(paths.frames() / ("frame_000" + std::to_string(t) + ".png")) ==
                first[static_cast<std::size_t>(t)]);

    tth::pipeline::cmd_eval(cfg, seed, dir);
    const nlohmann::json ev = read_json(paths.eval_json());
    CHECK(ev.at("split").get<std::string>() == "train");
    CHECK(std::isfinite(ev.at("aggregate").at("mse_mouth").get<double>()));
    CHECK(std::isfinite(ev.at("aggregate").at("lmd").get<double>()));
    CHECK(ev.at("aggregate").at("ssim_upper").get<double>() <= 1.0);
    CHECK(ev.at("image_ssim").get<double>() <= 1.0);
    CHECK(std::isfinite(ev.at("style_mse").get<double>()));

    CHECK_THROWS_AS(tth::pipeline::cmd_generate(cfg, seed, dir, "joy", false),
                    std::runtime_error);
    const fs::path fresh = fs::temp_directory_path() / "tth_pipeline_missing";
    fs::remove_all(fresh);
    CHECK_THROWS_AS(tth::pipeline::cmd_generate(cfg, seed, fresh, "neutral", false),
                    std::runtime_error);
    CHECK_FALSE(fs::exists(fresh / "frames"));
    fs::remove_all(fresh);
    fs::remove_all(dir);
}

TEST_CASE("gradient audit passes at reduced sizes", "[pipeline]") {
    const fs::path dir = fs::temp_directory_path() / "tth_pipeline_gradcheck";
    fs::remove_all(dir);
    const Config cfg;
    CHECK(tth::pipeline::cmd_gradcheck(cfg, 3, dir));
    const nlohmann::json j = read_json(tth::pipeline::Paths{dir}.gradcheck_json());
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("nets").size() == 9);
    for (const auto& [name, err] : j.at("nets").items()) {
        INFO(name);
        CHECK(err.get<double>() < 1e-4);
    }
    fs::remove_all(dir);
}
