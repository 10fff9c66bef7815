/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/nn/weights.hpp
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
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/nn/tape.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::nn {

/// Uniform fan-in scaled init: U(-sqrt(6/fan_in), sqrt(6/fan_in)). The
/// sqrt(6) gain keeps activation variance stable through deep relu stacks;
/// without it a nine-layer encoder-decoder collapses its pre-activations
/// onto the relu kink at init.
inline Tensor uniform_fanin(common::Rng& rng, std::vector<int> shape, int fan_in) {
    if (fan_in <= 0) throw std::invalid_argument("uniform_fanin: fan_in must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

/**
 * Named trainable parameters, iterated in sorted-name order so that the
 * optimizer, serialization, and gradient collection are all deterministic.
 */
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init) {
        auto [it, inserted] = params_.emplace(name, std::move(init));
        if (!inserted) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Tensor& get(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("ParamStore: missing parameter " + name);
        return it->second;
    }

    const Tensor& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::out_of_range("ParamStore: missing parameter " + name);
        return it->second;
    }

    std::map<std::string, Tensor>& items() { return params_; }
    const std::map<std::string, Tensor>& items() const { return params_; }

    std::size_t count() const { return params_.size(); }

    std::int64_t numel() const {
        std::int64_t n = 0;
        for (const auto& [k, v] : params_) n += v.numel();
        return n;
    }

    bool all_finite() const {
        for (const auto& [k, v] : params_)
            if (!v.all_finite()) return false;
        return true;
    }

private:
    std::map<std::string, Tensor> params_;
};

/**
 * Per-tape view of a ParamStore: every parameter registered as a gradient-
 * requiring leaf. Lives only as long as one forward/backward pass.
 */
class TapeBinding {
public:
    TapeBinding(Tape& tape, const ParamStore& store) : tape_(&tape) {
        for (const auto& [name, tensor] : store.items()) ids_[name] = tape.leaf(tensor, true);
    }

    int id(const std::string& name) const {
        auto it = ids_.find(name);
        if (it == ids_.end()) throw std::out_of_range("TapeBinding: missing parameter " + name);
        return it->second;
    }

    int operator[](const std::string& name) const { return id(name); }

    /// Gradients after backward, zeros for untouched parameters.
    std::map<std::string, Tensor> collect_grads() const {
        std::map<std::string, Tensor> out;
        for (const auto& [name, nid] : ids_) {
            if (tape_->has_grad(nid))
                out.emplace(name, tape_->grad(nid));
            else
                out.emplace(name, Tensor::zeros(tape_->val(nid).shape));
        }
        return out;
    }

private:
    Tape* tape_;
    std::map<std::string, int> ids_;
};

/**
 * Like TapeBinding, but registers every parameter as a constant. Used to
 * run one network inside another's training step without propagating
 * gradients into it (the generator step sees a frozen discriminator).
 */
class ConstBinding {
public:
    ConstBinding(Tape& tape, const ParamStore& store) {
        for (const auto& [name, tensor] : store.items()) ids_[name] = tape.constant(tensor);
    }

    int id(const std::string& name) const {
        auto it = ids_.find(name);
        if (it == ids_.end()) throw std::out_of_range("ConstBinding: missing parameter " + name);
        return it->second;
    }

    int operator[](const std::string& name) const { return id(name); }

private:
    std::map<std::string, int> ids_;
};

} // namespace tth::nn
