/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/data/vocab.hpp
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
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tth::data {

inline constexpr int kPhonemeVocab = 41;
inline constexpr int kWordVocab = 1859;
inline constexpr int kEmotionVocab = 4;
inline constexpr int kMouthDims = 28;
inline constexpr int kUpperDims = 23;
inline constexpr int kHeadDims = 6;

/**
 * Symbol tables: 41 phonemes (silence, 39 ARPAbet, unknown), 1859 words with
 * index 0 reserved for 'unknown', and the 4 emotion labels.
 */
struct Vocab {
    std::vector<std::string> phonemes;
    std::vector<std::string> words;
    std::vector<std::string> emotions;

    static constexpr int kSilence = 0;
    static constexpr int kUnknownPhoneme = 40;
    static constexpr int kUnknownWord = 0;

    void validate() const {
        if (phonemes.size() != kPhonemeVocab)
            throw std::invalid_argument("Vocab: phoneme count must be 41");
        if (words.size() != kWordVocab) throw std::invalid_argument("Vocab: word count must be 1859");
        if (emotions.size() != kEmotionVocab)
            throw std::invalid_argument("Vocab: emotion count must be 4");
        if (words[0] != "unknown") throw std::invalid_argument("Vocab: word index 0 must be 'unknown'");
        for (const auto* list : {&phonemes, &words, &emotions}) {
            std::set<std::string> seen(list->begin(), list->end());
            if (seen.size() != list->size()) throw std::invalid_argument("Vocab: duplicate symbol");
        }
    }

    int phoneme_index(const std::string& s) const { return index_of(phonemes, s, "phoneme"); }
    int word_index(const std::string& s) const { return index_of(words, s, "word"); }
    int emotion_index(const std::string& s) const { return index_of(emotions, s, "emotion"); }

    void save(const std::filesystem::path& path) const {
        nlohmann::json j;
        j["phonemes"] = phonemes;
        j["words"] = words;
        j["emotions"] = emotions;
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("Vocab: cannot write " + path.string());
        f << j.dump(2) << '\n';
    }

    static Vocab load(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("Vocab: cannot open " + path.string());
        nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
        if (j.is_discarded()) throw std::runtime_error("Vocab: malformed JSON in " + path.string());
        Vocab v;
        v.phonemes = j.at("phonemes").get<std::vector<std::string>>();
        v.words = j.at("words").get<std::vector<std::string>>();
        v.emotions = j.at("emotions").get<std::vector<std::string>>();
        v.validate();
        return v;
    }

private:
    static int index_of(const std::vector<std::string>& list, const std::string& s, const char* kind) {
        auto it = std::find(list.begin(), list.end(), s);
        if (it == list.end()) throw std::out_of_range(std::string("Vocab: unknown ") + kind + " " + s);
        return static_cast<int>(it - list.begin());
    }
};

/// Fixed symbol tables used by the synthetic corpus: silence, the 39
/// ARPAbet phonemes, unknown; words "unknown", w0001..w1858.
inline Vocab synth_vocab() {
    static const std::array<const char*, 39> arpabet = {
        "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY",
        "F",  "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY",
        "P",  "R",  "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};
    Vocab v;
    v.phonemes.push_back("sil");
    for (const char* p : arpabet) v.phonemes.emplace_back(p);
    v.phonemes.push_back("unk");
    v.words.push_back("unknown");
    for (int i = 1; i < kWordVocab; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "w%04d", i);
        v.words.emplace_back(buf);
    }
    v.emotions = {"surprise", "anger", "neutral", "happiness"};
    v.validate();
    return v;
}

} // namespace tth::data
