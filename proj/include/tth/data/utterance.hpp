/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/data/utterance.hpp
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

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tth/data/vocab.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::data {

/**
 * One aligned utterance: per-frame phoneme/word indices, an emotion label,
 * and the three parameter tracks (mouth 28, upper face 23, head pose 6).
 */
struct Utterance {
    int fps = 30;
    int emotion = 0;
    std::vector<int> ph;
    std::vector<int> w;
    nn::Tensor m_mou; // T x 28, weights in [0, 1]
    nn::Tensor m_upp; // T x 23, weights in [0, 1]
    nn::Tensor m_hed; // T x 6, Euler radians + translation

    int frames() const { return static_cast<int>(ph.size()); }

    void validate(const Vocab& vocab) const {
        const int T = frames();
        if (fps <= 0) throw std::invalid_argument("Utterance: fps must be positive");
        if (T < 1) throw std::invalid_argument("Utterance: T must be >= 1");
        if (static_cast<int>(w.size()) != T)
            throw std::invalid_argument("Utterance: word track length mismatch");
        if (emotion < 0 || emotion >= static_cast<int>(vocab.emotions.size()))
            throw std::out_of_range("Utterance: emotion index out of range");
        for (int p : ph)
            if (p < 0 || p >= static_cast<int>(vocab.phonemes.size()))
                throw std::out_of_range("Utterance: phoneme index out of range");
        for (int wi : w)
            if (wi < 0 || wi >= static_cast<int>(vocab.words.size()))
                throw std::out_of_range("Utterance: word index out of range");
        check_track(m_mou, T, kMouthDims, "m_mou", true);
        check_track(m_upp, T, kUpperDims, "m_upp", true);
        check_track(m_hed, T, kHeadDims, "m_hed", false);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["fps"] = fps;
        j["emotion"] = emotion;
        j["ph"] = ph;
        j["w"] = w;
        j["m_mou"] = rows_json(m_mou);
        j["m_upp"] = rows_json(m_upp);
        j["m_hed"] = rows_json(m_hed);
        return j;
    }

    static Utterance from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw std::invalid_argument("Utterance: document is not an object");
        Utterance u;
        u.fps = j.at("fps").get<int>();
        u.emotion = j.at("emotion").get<int>();
        u.ph = j.at("ph").get<std::vector<int>>();
        u.w = j.at("w").get<std::vector<int>>();
        u.m_mou = tensor_rows(j.at("m_mou"), kMouthDims, "m_mou");
        u.m_upp = tensor_rows(j.at("m_upp"), kUpperDims, "m_upp");
        u.m_hed = tensor_rows(j.at("m_hed"), kHeadDims, "m_hed");
        return u;
    }

private:
    static void check_track(const nn::Tensor& t, int T, int D, const char* name, bool unit_range) {
        if (t.rank() != 2 || t.rows() != T || t.cols() != D)
            throw std::invalid_argument(std::string("Utterance: ") + name + " must be T x " +
                                        std::to_string(D));
        for (double v : t.data) {
            if (!std::isfinite(v))
                throw std::invalid_argument(std::string("Utterance: non-finite value in ") + name);
            if (unit_range && (v < 0.0 || v > 1.0))
                throw std::invalid_argument(std::string("Utterance: ") + name + " outside [0,1]");
        }
    }

    static nlohmann::json rows_json(const nn::Tensor& t) {
        nlohmann::json rows = nlohmann::json::array();
        for (int r = 0; r < t.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
            rows.push_back(std::move(row));
        }
        return rows;
    }

    static nn::Tensor tensor_rows(const nlohmann::json& rows, int D, const char* name) {
        if (!rows.is_array() || rows.empty())
            throw std::invalid_argument(std::string("Utterance: ") + name + " must be a row array");
        const int T = static_cast<int>(rows.size());
        nn::Tensor t = nn::Tensor::zeros({T, D});
        for (int r = 0; r < T; ++r) {
            const auto& row = rows[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<int>(row.size()) != D)
                throw std::invalid_argument(std::string("Utterance: ") + name + " row width mismatch");
            for (int c = 0; c < D; ++c) t.at(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
        return t;
    }
};

/// Parse and fully validate one serialized utterance document.
inline Utterance parse_utterance(const std::string& bytes, const Vocab& vocab) {
    nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument("parse_utterance: malformed JSON");
    Utterance u = Utterance::from_json(j);
    u.validate(vocab);
    return u;
}

/// Canonical serialization: sorted keys, shortest round-trip doubles.
inline std::string serialize_utterance(const Utterance& u) { return u.to_json().dump(); }

} // namespace tth::data
