/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: tests/test_dataset.cpp
 *
 * Copyright 2026 The tth authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance to the License.
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
#include <filesystem>
#include <map>
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/data/align.hpp"
#include "tth/data/corpus.hpp"
#include "tth/data/mask_words.hpp"
#include "tth/data/synth.hpp"
#include "tth/data/utterance.hpp"
#include "tth/data/vocab.hpp"

using tth::common::Rng;
using tth::data::AlignSegment;
using tth::data::align_to_frames;
using tth::data::Corpus;
using tth::data::mask_unknown_words;
using tth::data::parse_utterance;
using tth::data::serialize_utterance;
using tth::data::synth_corpus;
using tth::data::synth_vocab;
using tth::data::Utterance;
using tth::data::Vocab;

namespace {

// Independent alignment oracle: per-frame linear scan over all segments.
std::vector<int> align_oracle(const std::vector<AlignSegment>& segs, int fps, int T, int fill) {
    std::vector<int> out(static_cast<std::size_t>(T), fill);
    for (int t = 0; t < T; ++t) {
        const double mid = (t + 0.5) / fps;
        for (const auto& s : segs)
            if (s.start_sec <= mid && mid < s.end_sec) out[static_cast<std::size_t>(t)] = s.symbol;
    }
    return out;
}

Utterance tiny_utterance(int T) {
    Utterance u;
    u.fps = 30;
    u.emotion = 0;
    u.ph.assign(static_cast<std::size_t>(T), 0);
    u.w.assign(static_cast<std::size_t>(T), 0);
    u.m_mou = tth::nn::Tensor::zeros({T, 28});
    u.m_upp = tth::nn::Tensor::zeros({T, 23});
    u.m_hed = tth::nn::Tensor::zeros({T, 6});
    return u;
}

} // namespace

TEST_CASE("synthetic vocab satisfies all invariants", "[dataset]") {
    const Vocab v = synth_vocab();
    REQUIRE_NOTHROW(v.validate());
    REQUIRE(v.phonemes.size() == 41);
    REQUIRE(v.words.size() == 1859);
    REQUIRE(v.emotions.size() == 4);
    REQUIRE(v.words[0] == "unknown");
    REQUIRE(v.phonemes[0] == "sil");
    REQUIRE(v.phonemes[40] == "unk");
    REQUIRE(v.emotion_index("anger") == 1);
    REQUIRE(v.phoneme_index("AA") == 1);
    REQUIRE_THROWS(v.phoneme_index("nope"));

    const auto dir = std::filesystem::temp_directory_path() / "tth_vocab_test";
    std::filesystem::create_directories(dir);
    v.save(dir / "vocab.json");
    const Vocab w = Vocab::load(dir / "vocab.json");
    REQUIRE(w.phonemes == v.phonemes);
    REQUIRE(w.words == v.words);
    REQUIRE(w.emotions == v.emotions);
}

TEST_CASE("utterance parsing validates and round-trips", "[dataset]") {
    const Vocab vocab = synth_vocab();

    SECTION("identity round-trip on a T=3 zero document") {
        const Utterance u = tiny_utterance(3);
        const Utterance v = parse_utterance(serialize_utterance(u), vocab);
        REQUIRE(v.frames() == 3);
        REQUIRE(v.m_mou.data == u.m_mou.data);
    }

    SECTION("length mismatch is rejected") {
        Utterance u = tiny_utterance(3);
        u.ph.pop_back();
        REQUIRE_THROWS(parse_utterance(serialize_utterance(u), vocab));
    }

    SECTION("vocab range and weight range are enforced") {
        Utterance bad_idx = tiny_utterance(2);
        bad_idx.ph[1] = 41;
        REQUIRE_THROWS(parse_utterance(serialize_utterance(bad_idx), vocab));
        Utterance bad_w = tiny_utterance(2);
        bad_w.m_mou.at(0, 5) = 1.5;
        REQUIRE_THROWS(parse_utterance(serialize_utterance(bad_w), vocab));
        Utterance bad_emo = tiny_utterance(2);
        bad_emo.emotion = 4;
        REQUIRE_THROWS(parse_utterance(serialize_utterance(bad_emo), vocab));
    }

    SECTION("malformed JSON is rejected") {
        REQUIRE_THROWS(parse_utterance("{not json", vocab));
    }

    SECTION("serialize(parse(x)) is byte-stable on synthetic data") {
        const Corpus c = synth_corpus(9, 2, 30);
        for (const auto& u : c.utterances) {
            const std::string s1 = serialize_utterance(u);
            const std::string s2 = serialize_utterance(parse_utterance(s1, c.vocab));
            REQUIRE(s1 == s2);
        }
    }
}

TEST_CASE("frame alignment follows the midpoint rule", "[dataset]") {
    SECTION("single covering segment") {
        const auto out = align_to_frames({{7, 0.0, 1.0}}, 2, 2, 0);
        REQUIRE(out == std::vector<int>{7, 7});
    }
    SECTION("two half-second segments at fps 2") {
        const auto out = align_to_frames({{1, 0.0, 0.5}, {2, 0.5, 1.0}}, 2, 2, 0);
        REQUIRE(out == std::vector<int>{1, 2});
    }
    SECTION("gaps take the fill symbol") {
        const auto out = align_to_frames({{3, 0.25, 0.5}}, 4, 4, 9);
        REQUIRE(out == std::vector<int>{9, 3, 9, 9});
    }
    SECTION("matches the linear-scan oracle on random segment sets") {
        Rng r(606);
        for (int iter = 0; iter < 50; ++iter) {
            const int fps = 10 + r.uniform_int(40);
            const int T = 20 + r.uniform_int(100);
            std::vector<AlignSegment> segs;
            double cursor = 0.0;
            while (cursor < static_cast<double>(T) / fps) {
                const double gap = r.uniform01() < 0.3 ? r.uniform(0.0, 0.1) : 0.0;
                const double start = cursor + gap;
                const double end = start + r.uniform(0.02, 0.4);
                segs.push_back({1 + r.uniform_int(39), start, end});
                cursor = end;
            }
            REQUIRE(align_to_frames(segs, fps, T, 0) == align_oracle(segs, fps, T, 0));
        }
    }
    SECTION("overlap and negative times are rejected") {
        REQUIRE_THROWS(align_to_frames({{1, 0.0, 0.6}, {2, 0.5, 1.0}}, 2, 2, 0));
        REQUIRE_THROWS(align_to_frames({{1, -0.1, 0.5}}, 2, 2, 0));
        REQUIRE_THROWS(align_to_frames({{1, 0.5, 0.4}}, 2, 2, 0));
    }
}

TEST_CASE("synthetic corpus is deterministic and valid", "[dataset]") {
    const Corpus a = synth_corpus(1, 4, 30);
    const Corpus b = synth_corpus(1, 4, 30);
    REQUIRE(a.utterances.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        REQUIRE(serialize_utterance(a.utterances[i]) == serialize_utterance(b.utterances[i]));

    const Corpus c = synth_corpus(2, 4, 30);
    bool any_diff = false;
    for (std::size_t i = 0; i < 4; ++i)
        any_diff = any_diff || serialize_utterance(a.utterances[i]) != serialize_utterance(c.utterances[i]);
    REQUIRE(any_diff);

    REQUIRE_NOTHROW(a.validate());
    for (const auto& u : a.utterances) {
        REQUIRE(u.frames() >= 3 * 30);
        REQUIRE(u.frames() <= 6 * 30);
        for (int t = 0; t < u.frames(); ++t) REQUIRE(std::abs(u.m_hed.at(t, 5) - 2.5) < 0.2);
    }
}

TEST_CASE("same phoneme context gives the same mouth frame", "[dataset]") {
    const Corpus c = synth_corpus(3, 3, 30);
    // Index interior frames by their 5-frame phoneme window (the smoothing
    // kernel's support) and compare mouth rows across matches.
    std::map<std::vector<int>, std::pair<int, int>> first; // window -> (utt, frame)
    int checked = 0;
    for (int ui = 0; ui < 3; ++ui) {
        const auto& u = c.utterances[static_cast<std::size_t>(ui)];
        for (int t = 2; t + 2 < u.frames(); ++t) {
            std::vector<int> win(u.ph.begin() + t - 2, u.ph.begin() + t + 3);
            auto [it, inserted] = first.try_emplace(win, ui, t);
            if (!inserted) {
                const auto& v = c.utterances[static_cast<std::size_t>(it->second.first)];
                for (int d = 0; d < 28; ++d)
                    REQUIRE(std::abs(u.m_mou.at(t, d) - v.m_mou.at(it->second.second, d)) < 1e-6);
                ++checked;
            }
        }
    }
    REQUIRE(checked > 50);
}

TEST_CASE("corpus directory round-trips", "[dataset]") {
    const Corpus a = synth_corpus(5, 6, 30);
    const auto dir = std::filesystem::temp_directory_path() / "tth_corpus_test";
    std::filesystem::remove_all(dir);
    a.save(dir);
    REQUIRE(std::filesystem::exists(dir / "vocab.json"));
    REQUIRE(std::filesystem::exists(dir / "splits.json"));
    REQUIRE(std::filesystem::exists(dir / "utt_0000.json"));

    const Corpus b = Corpus::load(dir);
    REQUIRE(b.names.size() == 6);
    REQUIRE(b.train_indices().size() == 5);
    REQUIRE(b.test_indices().size() == 1);
    for (std::size_t i = 0; i < b.utterances.size(); ++i) {
        // load order groups train before test; match by name
        const auto it = std::find(a.names.begin(), a.names.end(), b.names[i]);
        REQUIRE(it != a.names.end());
        const auto& ua = a.utterances[static_cast<std::size_t>(it - a.names.begin())];
        REQUIRE(serialize_utterance(b.utterances[i]) == serialize_utterance(ua));
    }
}

TEST_CASE("word-run masking replaces whole runs uniformly", "[dataset]") {
    SECTION("single run becomes all unknown") {
        Rng r(1);
        const std::vector<int> w(12, 44);
        const auto out = mask_unknown_words(w, 1, r);
        for (int v : out) REQUIRE(v == 0);
    }

    SECTION("k beyond run count is an error") {
        Rng r(2);
        const std::vector<int> w = {0, 5, 5, 0, 6, 6};
        REQUIRE_THROWS(mask_unknown_words(w, 3, r));
        REQUIRE_THROWS(mask_unknown_words(w, 0, r));
    }

    SECTION("runs are chosen uniformly") {
        // 5 runs of 3 frames; over 4000 draws of k=1 each run should be
        // masked with frequency 0.2 +- 0.05.
        std::vector<int> w;
        for (int run = 0; run < 5; ++run)
            for (int i = 0; i < 3; ++i) w.push_back(10 + run);
        Rng r(3);
        std::vector<int> hits(5, 0);
        const int draws = 4000;
        for (int d = 0; d < draws; ++d) {
            const auto out = mask_unknown_words(w, 1, r);
            for (int run = 0; run < 5; ++run) {
                if (out[static_cast<std::size_t>(run * 3)] == 0) {
                    REQUIRE(out[static_cast<std::size_t>(run * 3 + 1)] == 0);
                    REQUIRE(out[static_cast<std::size_t>(run * 3 + 2)] == 0);
                    ++hits[static_cast<std::size_t>(run)];
                }
            }
        }
        for (int run = 0; run < 5; ++run) {
            const double f = static_cast<double>(hits[static_cast<std::size_t>(run)]) / draws;
            REQUIRE(f > 0.15);
            REQUIRE(f < 0.25);
        }
    }

    SECTION("unchosen frames are untouched and adjacent equal words are one run") {
        Rng r(4);
        const std::vector<int> w = {0, 7, 7, 7, 0, 8, 8, 0};
        const auto out = mask_unknown_words(w, 2, r);
        for (int v : out) REQUIRE((v == 0));
    }
}
