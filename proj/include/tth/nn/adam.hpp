/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/nn/adam.hpp
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

#include "tth/nn/tensor.hpp"
#include "tth/nn/weights.hpp"

namespace tth::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/**
 * Adam with bias correction. First/second moment slots are keyed by
 * parameter name and updated in sorted order; state is exposed so
 * checkpoints can persist and restore mid-training.
 */
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }

    void step(ParamStore& params, const std::map<std::string, Tensor>& grads, double lr) {
        ++step_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (auto& [name, p] : params.items()) {
            auto git = grads.find(name);
            if (git == grads.end()) throw std::out_of_range("Adam: missing gradient for " + name);
            const Tensor& g = git->second;
            if (!p.same_shape(g)) throw std::invalid_argument("Adam: gradient shape mismatch for " + name);
            Tensor& m = slot(m_, name, p);
            Tensor& v = slot(v_, name, p);
            for (std::size_t i = 0; i < p.data.size(); ++i) {
                m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
                v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
                const double mh = m.data[i] / c1;
                const double vh = v.data[i] / c2;
                p.data[i] -= lr * mh / (std::sqrt(vh) + cfg_.eps);
            }
        }
    }

    long long step_count() const { return step_; }
    void set_step_count(long long s) { step_ = s; }

    std::map<std::string, Tensor>& moments1() { return m_; }
    std::map<std::string, Tensor>& moments2() { return v_; }
    const std::map<std::string, Tensor>& moments1() const { return m_; }
    const std::map<std::string, Tensor>& moments2() const { return v_; }

private:
    static Tensor& slot(std::map<std::string, Tensor>& slots, const std::string& name, const Tensor& like) {
        auto it = slots.find(name);
        if (it == slots.end()) it = slots.emplace(name, Tensor::zeros(like.shape)).first;
        return it->second;
    }

    AdamConfig cfg_;
    long long step_ = 0;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
};

/// Linear ramp from lr0 (epoch <= fixed_epochs) down to lr1 at total_epochs.
inline double linear_decay_lr(double lr0, double lr1, int epoch, int fixed_epochs, int total_epochs) {
    if (epoch < fixed_epochs) return lr0;
    if (epoch >= total_epochs || total_epochs == fixed_epochs) return lr1;
    const double f = static_cast<double>(epoch - fixed_epochs) /
                     static_cast<double>(total_epochs - fixed_epochs);
    return lr0 + (lr1 - lr0) * f;
}

} // namespace tth::nn
