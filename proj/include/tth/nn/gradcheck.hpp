/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/nn/gradcheck.hpp
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
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "tth/nn/tensor.hpp"
#include "tth/nn/weights.hpp"

namespace tth::nn {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    int worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

/**
 * Central finite differences against the analytic gradients. `loss_fn`
 * must be a pure function of the store. Relative error uses
 * max(1, |analytic|, |numeric|) in the denominator so tiny gradients do
 * not blow up the ratio. With `max_elems_per_param` > 0, large tensors are
 * strided deterministically so embedding tables stay affordable.
 */
inline GradCheckResult grad_check(ParamStore& params,
                                  const std::function<double(const ParamStore&)>& loss_fn,
                                  const std::map<std::string, Tensor>& analytic_grads,
                                  double h = 1e-5, std::size_t max_elems_per_param = 0) {
    GradCheckResult res;
    for (auto& [name, p] : params.items()) {
        auto git = analytic_grads.find(name);
        if (git == analytic_grads.end()) throw std::out_of_range("grad_check: missing gradient for " + name);
        const Tensor& ag = git->second;
        std::size_t stride = 1;
        if (max_elems_per_param > 0 && p.data.size() > max_elems_per_param)
            stride = p.data.size() / max_elems_per_param;
        for (std::size_t i = 0; i < p.data.size(); i += stride) {
            const double orig = p.data[i];
            p.data[i] = orig + h;
            const double fp = loss_fn(params);
            p.data[i] = orig - h;
            const double fm = loss_fn(params);
            p.data[i] = orig;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = ag.data[i];
            const double denom = std::max({1.0, std::abs(ana), std::abs(num)});
            const double rel = std::abs(ana - num) / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = name;
                res.worst_index = static_cast<int>(i);
                res.analytic = ana;
                res.numeric = num;
            }
        }
    }
    return res;
}

} // namespace tth::nn
