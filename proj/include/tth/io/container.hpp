/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/io/container.hpp
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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tth/nn/adam.hpp"
#include "tth/nn/tensor.hpp"
#include "tth/nn/weights.hpp"

namespace tth::io {

static_assert(std::endian::native == std::endian::little,
              "tensor container assumes a little-endian host");

/**
 * Named-tensor file: 8-byte little-endian header length, UTF-8 JSON header
 * {"magic", "meta", "tensors": [{"name","shape","offset"}]}, then a flat
 * little-endian float64 payload. Offsets count doubles from payload start.
 * Tensors are written in sorted name order and the JSON has sorted keys,
 * so identical content yields identical bytes.
 */
struct Container {
    nlohmann::json meta = nlohmann::json::object();
    std::map<std::string, nn::Tensor> tensors;

    static constexpr const char* kMagic = "tth.tensors.v1";

    void save(const std::filesystem::path& path) const {
        nlohmann::json header;
        header["magic"] = kMagic;
        header["meta"] = meta;
        nlohmann::json list = nlohmann::json::array();
        std::int64_t offset = 0;
        for (const auto& [name, t] : tensors) {
            nlohmann::json e;
            e["name"] = name;
            e["shape"] = t.shape;
            e["offset"] = offset;
            list.push_back(std::move(e));
            offset += t.numel();
        }
        header["tensors"] = std::move(list);
        const std::string hs = header.dump();

        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
        const std::uint64_t hlen = hs.size();
        f.write(reinterpret_cast<const char*>(&hlen), 8);
        f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (const auto& [name, t] : tensors)
            f.write(reinterpret_cast<const char*>(t.data.data()),
                    static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!f) throw std::runtime_error("write failed: " + path.string());
    }

    static Container load(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open: " + path.string());
        std::uint64_t hlen = 0;
        f.read(reinterpret_cast<char*>(&hlen), 8);
        if (!f || hlen == 0 || hlen > (1ull << 30))
            throw std::runtime_error("corrupt tensor container header: " + path.string());
        std::string hs(hlen, '\0');
        f.read(hs.data(), static_cast<std::streamsize>(hlen));
        if (!f) throw std::runtime_error("truncated tensor container: " + path.string());
        nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
        if (header.is_discarded() || !header.is_object() || header.value("magic", "") != kMagic)
            throw std::runtime_error("not a tensor container: " + path.string());

        std::vector<double> payload;
        {
            std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
            if (raw.size() % sizeof(double) != 0)
                throw std::runtime_error("payload not a whole number of doubles: " + path.string());
            payload.resize(raw.size() / sizeof(double));
            std::memcpy(payload.data(), raw.data(), raw.size());
        }

        Container c;
        c.meta = header.value("meta", nlohmann::json::object());
        for (const auto& e : header.at("tensors")) {
            const std::string name = e.at("name").get<std::string>();
            const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
            const std::int64_t offset = e.at("offset").get<std::int64_t>();
            const std::int64_t n = nn::Tensor::numel_of(shape);
            if (offset < 0 || offset + n > static_cast<std::int64_t>(payload.size()))
                throw std::runtime_error("tensor " + name + " out of payload bounds: " + path.string());
            nn::Tensor t = nn::Tensor::zeros(shape);
            std::copy(payload.begin() + offset, payload.begin() + offset + n, t.data.begin());
            auto [it, inserted] = c.tensors.emplace(name, std::move(t));
            if (!inserted) throw std::runtime_error("duplicate tensor " + name + " in " + path.string());
        }
        return c;
    }
};

/**
 * Training checkpoint: parameters under their own names, optimizer moments
 * under "<name>.m" / "<name>.v", step count and caller metadata in meta.
 */
inline void save_checkpoint(const std::filesystem::path& path, const nn::ParamStore& params,
                            const nn::Adam* adam = nullptr,
                            nlohmann::json extra_meta = nlohmann::json::object()) {
    Container c;
    c.meta = std::move(extra_meta);
    c.meta["kind"] = "checkpoint";
    for (const auto& [name, t] : params.items()) c.tensors.emplace(name, t);
    if (adam) {
        c.meta["adam_step"] = adam->step_count();
        for (const auto& [name, t] : adam->moments1()) c.tensors.emplace(name + ".m", t);
        for (const auto& [name, t] : adam->moments2()) c.tensors.emplace(name + ".v", t);
    }
    c.save(path);
}

/// Restore parameters (shapes must match the store) and optimizer state.
inline void load_checkpoint(const std::filesystem::path& path, nn::ParamStore& params,
                            nn::Adam* adam = nullptr, nlohmann::json* meta_out = nullptr) {
    Container c = Container::load(path);
    for (auto& [name, p] : params.items()) {
        auto it = c.tensors.find(name);
        if (it == c.tensors.end())
            throw std::runtime_error("checkpoint missing parameter " + name + ": " + path.string());
        if (!p.same_shape(it->second))
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": " + path.string());
        p = it->second;
    }
    if (adam) {
        adam->set_step_count(c.meta.value("adam_step", 0ll));
        adam->moments1().clear();
        adam->moments2().clear();
        for (const auto& [name, p] : params.items()) {
            auto im = c.tensors.find(name + ".m");
            auto iv = c.tensors.find(name + ".v");
            if (im != c.tensors.end()) adam->moments1().emplace(name, im->second);
            if (iv != c.tensors.end()) adam->moments2().emplace(name, iv->second);
        }
    }
    if (meta_out) *meta_out = c.meta;
}

} // namespace tth::io
