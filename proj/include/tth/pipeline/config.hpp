/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/pipeline/config.hpp
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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace tth::pipeline {

/**
 * Flat key-value configuration: `key = value` lines, `#` comments. Every
 * key has a default, so an absent file or empty document runs the whole
 * pipeline; unknown keys are rejected to surface typos early. Training
 * defaults are the published schedules; artifact-size keys default small
 * enough for a desk run.
 */
class Config {
public:
    Config() : values_(defaults()) {}

    static Config from_file(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("config: cannot open " + path.string());
        std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return from_string(text);
    }

    static Config from_string(const std::string& text) {
        Config cfg;
        std::size_t pos = 0;
        int lineno = 0;
        while (pos <= text.size()) {
            const std::size_t eol = text.find('\n', pos);
            std::string line = text.substr(pos, eol == std::string::npos ? eol : eol - pos);
            pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("config: line " + std::to_string(lineno) +
                                         " is not 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (cfg.values_.find(key) == cfg.values_.end())
                throw std::runtime_error("config: unknown key '" + key + "'");
            if (value.empty())
                throw std::runtime_error("config: empty value for '" + key + "'");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    const std::string& get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw std::runtime_error("config: unknown key '" + key + "'");
        return it->second;
    }

    int get_int(const std::string& key) const {
        const std::string& v = get_string(key);
        std::size_t used = 0;
        int out = 0;
        try {
            out = std::stoi(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != v.size())
            throw std::runtime_error("config: '" + key + "' needs an integer, got '" + v + "'");
        return out;
    }

    double get_double(const std::string& key) const {
        const std::string& v = get_string(key);
        std::size_t used = 0;
        double out = 0.0;
        try {
            out = std::stod(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != v.size())
            throw std::runtime_error("config: '" + key + "' needs a number, got '" + v + "'");
        return out;
    }

    void set(const std::string& key, const std::string& value) {
        if (values_.find(key) == values_.end())
            throw std::runtime_error("config: unknown key '" + key + "'");
        values_[key] = value;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static std::map<std::string, std::string> defaults() {
        return {
            {"data.utterances", "12"},
            {"data.fps", "30"},
            {"speaker.utterances", "2"},
            {"anim.mouth.epochs_fixed", "400"},
            {"anim.mouth.epochs_decay", "400"},
            {"anim.encdec.epochs_fixed", "50"},
            {"anim.encdec.epochs_decay", "50"},
            {"anim.batch", "32"},
            {"anim.g_lr", "5e-4"},
            {"anim.d_lr", "1e-5"},
            {"anim.lambda.mouth", "50"},
            {"anim.lambda.upper", "100"},
            {"anim.mouth.channels", "64"},
            {"anim.mouth.blocks", "4"},
            {"anim.encdec.channels", "64"},
            {"anim.disc.channels", "64"},
            {"fit.keyframes", "30"},
            {"fit.lambda", "1e-4"},
            {"fit.iterations", "200"},
            {"fit.seq_iterations", "60"},
            {"style.hidden", "64"},
            {"style.batch", "256"},
            {"style.epochs1", "1000"},
            {"style.lr1", "5e-3"},
            {"style.epochs2", "500"},
            {"style.lr2", "1e-3"},
            {"style.epochs3", "300"},
            {"style.lr3", "2e-4"},
            {"render.size", "64"},
            {"render.channels", "16"},
            {"render.disc.channels", "16"},
            {"render.pyramid.stages", "4"},
            {"render.pyramid.channels", "8"},
            {"render.alpha", "10"},
            {"render.beta", "100"},
            {"render.gamma", "100"},
            {"render.epochs", "50"},
            {"render.batch", "3"},
            {"render.lr0", "2e-4"},
            {"render.lr1", "1e-4"},
            {"render.frames", "8"},
            {"generate.frames", "90"},
        };
    }

    std::map<std::string, std::string> values_;
};

} // namespace tth::pipeline
