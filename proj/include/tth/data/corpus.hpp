/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/data/corpus.hpp
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

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tth/data/utterance.hpp"
#include "tth/data/vocab.hpp"

namespace tth::data {

/**
 * Corpus directory layout: vocab.json, splits.json {"train":[name],
 * "test":[name]}, and one <name>.json utterance file per entry.
 */
struct Corpus {
    Vocab vocab;
    std::vector<std::string> names;
    std::vector<Utterance> utterances;
    std::vector<bool> is_train;

    void validate() const {
        vocab.validate();
        if (names.size() != utterances.size() || names.size() != is_train.size())
            throw std::invalid_argument("Corpus: parallel arrays disagree");
        std::set<std::string> seen(names.begin(), names.end());
        if (seen.size() != names.size()) throw std::invalid_argument("Corpus: duplicate utterance name");
        for (const auto& u : utterances) u.validate(vocab);
    }

    std::vector<int> train_indices() const { return indices(true); }
    std::vector<int> test_indices() const { return indices(false); }

    void save(const std::filesystem::path& dir) const {
        validate();
        std::filesystem::create_directories(dir);
        vocab.save(dir / "vocab.json");
        nlohmann::json splits;
        splits["train"] = nlohmann::json::array();
        splits["test"] = nlohmann::json::array();
        for (std::size_t i = 0; i < names.size(); ++i)
            splits[is_train[i] ? "train" : "test"].push_back(names[i]);
        {
            std::ofstream f(dir / "splits.json", std::ios::binary | std::ios::trunc);
            if (!f) throw std::runtime_error("Corpus: cannot write splits.json");
            f << splits.dump(2) << '\n';
        }
        for (std::size_t i = 0; i < names.size(); ++i) {
            std::ofstream f(dir / (names[i] + ".json"), std::ios::binary | std::ios::trunc);
            if (!f) throw std::runtime_error("Corpus: cannot write " + names[i] + ".json");
            f << serialize_utterance(utterances[i]);
        }
    }

    static Corpus load(const std::filesystem::path& dir) {
        Corpus c;
        c.vocab = Vocab::load(dir / "vocab.json");
        std::ifstream f(dir / "splits.json", std::ios::binary);
        if (!f) throw std::runtime_error("Corpus: cannot open splits.json in " + dir.string());
        nlohmann::json splits = nlohmann::json::parse(f, nullptr, false);
        if (splits.is_discarded()) throw std::runtime_error("Corpus: malformed splits.json");
        for (const char* key : {"train", "test"}) {
            for (const auto& n : splits.at(key)) {
                const std::string name = n.get<std::string>();
                std::ifstream uf(dir / (name + ".json"), std::ios::binary);
                if (!uf) throw std::runtime_error("Corpus: missing utterance file " + name + ".json");
                std::string bytes((std::istreambuf_iterator<char>(uf)),
                                  std::istreambuf_iterator<char>());
                c.names.push_back(name);
                c.utterances.push_back(parse_utterance(bytes, c.vocab));
                c.is_train.push_back(std::string(key) == "train");
            }
        }
        c.validate();
        return c;
    }

private:
    std::vector<int> indices(bool train) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < is_train.size(); ++i)
            if (is_train[i] == train) out.push_back(static_cast<int>(i));
        return out;
    }
};

} // namespace tth::data
