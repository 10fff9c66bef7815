/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: tests/test_io.cpp
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
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/io/container.hpp"
#include "tth/io/png.hpp"
#include "tth/nn/adam.hpp"
#include "tth/nn/tensor.hpp"

using tth::common::Rng;
using tth::io::Container;
using tth::nn::Tensor;

namespace {

std::vector<char> slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::filesystem::path tmpdir() {
    auto d = std::filesystem::temp_directory_path() / "tth_io_test";
    std::filesystem::create_directories(d);
    return d;
}

} // namespace

TEST_CASE("tensor container round-trips values and metadata", "[io]") {
    Rng r(41);
    Container c;
    c.meta["note"] = "round trip";
    c.meta["number"] = 7;
    Tensor a = Tensor::zeros({3, 4});
    for (double& v : a.data) v = r.normal();
    Tensor b = Tensor::zeros({2, 2, 2});
    for (double& v : b.data) v = r.uniform(-5.0, 5.0);
    c.tensors.emplace("alpha", a);
    c.tensors.emplace("beta", b);

    const auto path = tmpdir() / "roundtrip.tns";
    c.save(path);
    Container d = Container::load(path);

    REQUIRE(d.meta["note"] == "round trip");
    REQUIRE(d.meta["number"] == 7);
    REQUIRE(d.tensors.size() == 2);
    REQUIRE(d.tensors.at("alpha").shape == a.shape);
    REQUIRE(d.tensors.at("alpha").data == a.data);
    REQUIRE(d.tensors.at("beta").data == b.data);
}

TEST_CASE("container writes are byte-identical across saves", "[io]") {
    Container c;
    c.meta["k"] = "v";
    c.tensors.emplace("t", Tensor({2, 3}, {1.5, -2.25, 0.1, 4.0, 1e-30, -0.0}));
    const auto p1 = tmpdir() / "a.tns";
    const auto p2 = tmpdir() / "b.tns";
    c.save(p1);
    c.save(p2);
    REQUIRE(slurp(p1) == slurp(p2));
}

TEST_CASE("container load rejects corrupt input", "[io]") {
    const auto path = tmpdir() / "bad.tns";
    {
        std::ofstream f(path, std::ios::binary);
        f << "definitely not a tensor container";
    }
    REQUIRE_THROWS(Container::load(path));
}

TEST_CASE("checkpoint restores parameters and optimizer state", "[io]") {
    Rng r(42);
    tth::nn::ParamStore ps;
    ps.add("w", Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
    ps.add("b", Tensor({2}, {-1.0, 1.0}));
    tth::nn::Adam opt(tth::nn::AdamConfig{0.5, 0.99, 1e-8});
    std::map<std::string, Tensor> g{{"w", Tensor({2, 2}, {0.1, -0.2, 0.3, -0.4})},
                                    {"b", Tensor({2}, {0.5, -0.5})}};
    opt.step(ps, g, 0.01);
    opt.step(ps, g, 0.01);

    const auto path = tmpdir() / "ckpt.tns";
    tth::io::save_checkpoint(path, ps, &opt, {{"epoch", 2}});

    tth::nn::ParamStore ps2;
    ps2.add("w", Tensor::zeros({2, 2}));
    ps2.add("b", Tensor::zeros({2}));
    tth::nn::Adam opt2(opt.config());
    nlohmann::json meta;
    tth::io::load_checkpoint(path, ps2, &opt2, &meta);

    REQUIRE(ps2.get("w").data == ps.get("w").data);
    REQUIRE(ps2.get("b").data == ps.get("b").data);
    REQUIRE(opt2.step_count() == 2);
    REQUIRE(opt2.moments1().at("w").data == opt.moments1().at("w").data);
    REQUIRE(opt2.moments2().at("b").data == opt.moments2().at("b").data);
    REQUIRE(meta["epoch"] == 2);

    // Continued training must agree exactly with the uninterrupted run.
    opt.step(ps, g, 0.01);
    opt2.step(ps2, g, 0.01);
    REQUIRE(ps2.get("w").data == ps.get("w").data);

    tth::nn::ParamStore wrong;
    wrong.add("w", Tensor::zeros({3, 3}));
    REQUIRE_THROWS(tth::io::load_checkpoint(path, wrong));
}

TEST_CASE("png writer is deterministic and well-formed", "[io]") {
    Tensor img = Tensor::zeros({5, 7, 3});
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 7; ++x) {
            img.at(y, x, 0) = static_cast<double>(x) / 6.0;
            img.at(y, x, 1) = static_cast<double>(y) / 4.0;
            img.at(y, x, 2) = 1.5;  // clamps to 255
        }
    const auto p1 = tmpdir() / "img1.png";
    const auto p2 = tmpdir() / "img2.png";
    tth::io::PngWriter::write(p1, img);
    tth::io::PngWriter::write(p2, img);
    const auto b1 = slurp(p1);
    REQUIRE(b1 == slurp(p2));

    // Signature, IHDR length/type, 7 x 5 dimensions.
    REQUIRE(b1.size() > 45);
    const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    for (int i = 0; i < 8; ++i) REQUIRE(static_cast<unsigned char>(b1[static_cast<std::size_t>(i)]) == sig[i]);
    REQUIRE(std::string(b1.begin() + 12, b1.begin() + 16) == "IHDR");
    REQUIRE(static_cast<unsigned char>(b1[19]) == 7);  // width low byte
    REQUIRE(static_cast<unsigned char>(b1[23]) == 5);  // height low byte
    REQUIRE(static_cast<unsigned char>(b1[24]) == 8);  // bit depth
    REQUIRE(static_cast<unsigned char>(b1[25]) == 2);  // RGB
}

TEST_CASE("png writer rejects non-image shapes", "[io]") {
    REQUIRE_THROWS(tth::io::PngWriter::write(tmpdir() / "x.png", Tensor::zeros({4, 4})));
    REQUIRE_THROWS(tth::io::PngWriter::write(tmpdir() / "y.png", Tensor::zeros({4, 4, 1})));
}
