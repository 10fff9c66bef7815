/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/face/model.hpp
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

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tth/common/rng.hpp"
#include "tth/data/vocab.hpp"
#include "tth/io/container.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::face {

inline constexpr int kShapeDims = 60;
inline constexpr int kExprDims = 51; // 23 upper + 28 mouth
inline constexpr int kNumLandmarks = 68;

/**
 * Multi-linear face model: vertices = mean + sum_j s_j shape_j + sum_j e_j
 * expr_j. Expression components are ordered as 23 upper-face rows followed
 * by 28 mouth rows so an expression vector can be assembled directly from
 * (m^upp, m^mou). Coordinates are x right, y down, z toward the camera.
 */
struct FaceModel {
    nn::Tensor mean;        // N x 3
    nn::Tensor shape_basis; // 60 x N x 3
    nn::Tensor expr_basis;  // 51 x N x 3
    std::vector<int> landmarks; // 68 vertex indices

    int num_vertices() const { return mean.rows(); }

    void validate() const {
        if (mean.rank() != 2 || mean.cols() != 3)
            throw std::invalid_argument("FaceModel: mean must be N x 3");
        const int N = mean.rows();
        if (shape_basis.shape != std::vector<int>{kShapeDims, N, 3})
            throw std::invalid_argument("FaceModel: shape basis must be 60 x N x 3");
        if (expr_basis.shape != std::vector<int>{kExprDims, N, 3})
            throw std::invalid_argument("FaceModel: expression basis must be 51 x N x 3");
        if (static_cast<int>(landmarks.size()) != kNumLandmarks)
            throw std::invalid_argument("FaceModel: 68 landmark indices required");
        std::set<int> seen;
        for (int idx : landmarks) {
            if (idx < 0 || idx >= N) throw std::invalid_argument("FaceModel: landmark index out of range");
            if (!seen.insert(idx).second) throw std::invalid_argument("FaceModel: duplicate landmark index");
        }
        if (!mean.all_finite() || !shape_basis.all_finite() || !expr_basis.all_finite())
            throw std::invalid_argument("FaceModel: non-finite entries");
    }
};

/// vertices = mean + sum_j s_j shape_j + sum_j e_j expr_j.
inline nn::Tensor eval_model(const FaceModel& model, const std::vector<double>& s,
                             const std::vector<double>& e) {
    if (static_cast<int>(s.size()) != kShapeDims)
        throw std::invalid_argument("eval_model: s must have 60 entries");
    if (static_cast<int>(e.size()) != kExprDims)
        throw std::invalid_argument("eval_model: e must have 51 entries");
    nn::Tensor out = model.mean;
    const std::size_t n = out.data.size();
    for (int j = 0; j < kShapeDims; ++j) {
        const double c = s[static_cast<std::size_t>(j)];
        if (c == 0.0) continue;
        const double* b = &model.shape_basis.data[static_cast<std::size_t>(j) * n];
        for (std::size_t i = 0; i < n; ++i) out.data[i] += c * b[i];
    }
    for (int j = 0; j < kExprDims; ++j) {
        const double c = e[static_cast<std::size_t>(j)];
        if (c == 0.0) continue;
        const double* b = &model.expr_basis.data[static_cast<std::size_t>(j) * n];
        for (std::size_t i = 0; i < n; ++i) out.data[i] += c * b[i];
    }
    return out;
}

/**
 * The model restricted to its 68 landmark vertices, flattened so landmark
 * positions are mean + s*S + e*E with row vectors: mean 1 x 204,
 * S 60 x 204, E 51 x 204 (204 = 68 * 3).
 */
struct LandmarkBases {
    nn::Tensor mean; // 1 x 204
    nn::Tensor shape_mat; // 60 x 204
    nn::Tensor expr_mat; // 51 x 204
};

inline LandmarkBases landmark_bases(const FaceModel& model) {
    model.validate();
    const int L = kNumLandmarks;
    LandmarkBases lb;
    lb.mean = nn::Tensor::zeros({1, 3 * L});
    lb.shape_mat = nn::Tensor::zeros({kShapeDims, 3 * L});
    lb.expr_mat = nn::Tensor::zeros({kExprDims, 3 * L});
    const std::size_t n = model.mean.data.size();
    for (int i = 0; i < L; ++i) {
        const int v = model.landmarks[static_cast<std::size_t>(i)];
        for (int c = 0; c < 3; ++c) {
            lb.mean.data[static_cast<std::size_t>(3 * i + c)] = model.mean.at(v, c);
            for (int j = 0; j < kShapeDims; ++j)
                lb.shape_mat.at(j, 3 * i + c) =
                    model.shape_basis.data[static_cast<std::size_t>(j) * n +
                                           static_cast<std::size_t>(v) * 3 + c];
            for (int j = 0; j < kExprDims; ++j)
                lb.expr_mat.at(j, 3 * i + c) =
                    model.expr_basis.data[static_cast<std::size_t>(j) * n +
                                          static_cast<std::size_t>(v) * 3 + c];
        }
    }
    return lb;
}

/// Landmark vertex positions (68 x 3) without evaluating the full mesh.
inline nn::Tensor landmark_positions(const LandmarkBases& lb, const std::vector<double>& s,
                                     const std::vector<double>& e) {
    if (static_cast<int>(s.size()) != kShapeDims || static_cast<int>(e.size()) != kExprDims)
        throw std::invalid_argument("landmark_positions: parameter lengths must be 60/51");
    nn::Tensor out = nn::Tensor::zeros({kNumLandmarks, 3});
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = lb.mean.data[i];
    for (int j = 0; j < kShapeDims; ++j) {
        const double c = s[static_cast<std::size_t>(j)];
        if (c == 0.0) continue;
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] += c * lb.shape_mat.data[static_cast<std::size_t>(j) * out.data.size() + i];
    }
    for (int j = 0; j < kExprDims; ++j) {
        const double c = e[static_cast<std::size_t>(j)];
        if (c == 0.0) continue;
        for (std::size_t i = 0; i < out.data.size(); ++i)
            out.data[i] += c * lb.expr_mat.data[static_cast<std::size_t>(j) * out.data.size() + i];
    }
    return out;
}

namespace detail {

/// Canonical 68-point face layout in [-1,1] x [-1,1], y down: jaw 0-16,
/// brows 17-21 / 22-26, nose bridge 27-30, nose base 31-35, eyes 36-41 /
/// 42-47, outer lip 48-59, inner lip 60-67.
inline std::vector<std::array<double, 2>> canonical_landmarks() {
    std::vector<std::array<double, 2>> p(kNumLandmarks);
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i <= 16; ++i) {
        const double a = pi * (1.0 - i / 16.0);
        p[static_cast<std::size_t>(i)] = {0.72 * std::cos(a), -0.05 + 0.75 * std::sin(a)};
    }
    for (int j = 0; j < 5; ++j) {
        const double u = j / 4.0;
        p[static_cast<std::size_t>(17 + j)] = {-0.52 + 0.40 * u, -0.38 - 0.06 * std::sin(pi * u)};
        p[static_cast<std::size_t>(22 + j)] = {0.12 + 0.40 * u, -0.38 - 0.06 * std::sin(pi * u)};
    }
    for (int j = 0; j < 4; ++j)
        p[static_cast<std::size_t>(27 + j)] = {0.0, -0.28 + 0.40 * j / 3.0};
    for (int j = 0; j < 5; ++j)
        p[static_cast<std::size_t>(31 + j)] = {-0.16 + 0.08 * j, 0.20 + 0.04 * std::sin(pi * j / 4.0)};
    for (int k = 0; k < 6; ++k) {
        const double a = pi - k * pi / 3.0;
        p[static_cast<std::size_t>(36 + k)] = {-0.32 + 0.13 * std::cos(a), -0.18 - 0.055 * std::sin(a)};
        p[static_cast<std::size_t>(42 + k)] = {0.32 + 0.13 * std::cos(pi + k * pi / 3.0),
                                               -0.18 + 0.055 * std::sin(pi + k * pi / 3.0)};
    }
    for (int k = 0; k < 12; ++k) {
        const double a = pi + k * pi / 6.0;
        p[static_cast<std::size_t>(48 + k)] = {0.24 * std::cos(a), 0.38 + 0.10 * std::sin(a)};
    }
    for (int k = 0; k < 8; ++k) {
        const double a = pi + k * pi / 4.0;
        p[static_cast<std::size_t>(60 + k)] = {0.15 * std::cos(a), 0.38 + 0.045 * std::sin(a)};
    }
    return p;
}

/// Frontal depth relief: smooth dome plus a nose ridge.
inline double face_depth(double x, double y) {
    const double r2 = (x / 0.85) * (x / 0.85) + (y / 0.95) * (y / 0.95);
    double z = 0.30 * std::sqrt(std::max(0.0, 1.0 - r2));
    z += 0.12 * std::exp(-((x * x) + (y - 0.08) * (y - 0.08)) / 0.03);
    return z;
}

/// Smooth scalar features of a vertex position; the basis fields are random
/// combinations of these, so every basis vector varies smoothly over the
/// mesh. 30 features x 3 coordinates leaves rank to spare for 60 vectors.
inline std::vector<double> smooth_features(double x, double y, double z) {
    return {1.0,    x,      y,      z,      x * x,  y * y,  z * z,  x * y,  x * z,  y * z,
            x * x * x, y * y * y, z * z * z, x * x * y, x * x * z, x * y * y, y * y * z,
            x * z * z, y * z * z, x * y * z, std::sin(2 * x), std::cos(2 * x), std::sin(2 * y),
            std::cos(2 * y), std::sin(2 * z), std::cos(2 * z), std::sin(x + y), std::cos(y + z),
            std::sin(x + z), std::sin(x - y)};
}

/// In-place modified Gram-Schmidt over rows [begin, end) of a {B, N, 3}
/// basis tensor, two passes for numerical stability, then per-row scaling
/// by scale * decay^(row - begin).
inline void orthogonalize_rows(nn::Tensor& basis, int begin, int end, double scale, double decay) {
    const std::size_t n = basis.data.size() / static_cast<std::size_t>(basis.dim(0));
    auto row = [&](int j) { return &basis.data[static_cast<std::size_t>(j) * n]; };
    for (int j = begin; j < end; ++j) {
        double* bj = row(j);
        for (int pass = 0; pass < 2; ++pass)
            for (int k = begin; k < j; ++k) {
                const double* bk = row(k);
                double d = 0.0;
                for (std::size_t i = 0; i < n; ++i) d += bj[i] * bk[i];
                for (std::size_t i = 0; i < n; ++i) bj[i] -= d * bk[i];
            }
        double nrm = 0.0;
        for (std::size_t i = 0; i < n; ++i) nrm += bj[i] * bj[i];
        nrm = std::sqrt(nrm);
        if (nrm < 1e-10) throw std::runtime_error("face model basis degenerated during orthogonalization");
        for (std::size_t i = 0; i < n; ++i) bj[i] /= nrm;
    }
    for (int j = begin; j < end; ++j) {
        const double s = scale * std::pow(decay, j - begin);
        double* bj = row(j);
        for (std::size_t i = 0; i < n; ++i) bj[i] *= s;
    }
}

} // namespace detail

/**
 * Procedurally generated stand-in model: an ellipsoidal head whose first 68
 * vertices carry the canonical landmark layout, plus a Fibonacci shell of
 * filler vertices. Shape basis: 60 orthogonalized smooth random fields with
 * decaying scales. Expression basis: 51 orthogonalized smooth fields
 * spatially damped to the upper face (rows 0-22) or the mouth (rows 23-50).
 */
inline FaceModel synth_face_model(std::uint64_t seed, int shell_vertices = 200) {
    common::Rng rng(common::stage_seed(seed, "face.model"));
    const int N = kNumLandmarks + shell_vertices;
    FaceModel m;
    m.mean = nn::Tensor::zeros({N, 3});

    const auto lm2d = detail::canonical_landmarks();
    for (int i = 0; i < kNumLandmarks; ++i) {
        const double x = lm2d[static_cast<std::size_t>(i)][0];
        const double y = lm2d[static_cast<std::size_t>(i)][1];
        m.mean.at(i, 0) = x;
        m.mean.at(i, 1) = y;
        m.mean.at(i, 2) = detail::face_depth(x, y);
    }
    constexpr double pi = 3.14159265358979323846;
    const double golden = pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < shell_vertices; ++k) {
        const double yy = 1.0 - 2.0 * (k + 0.5) / shell_vertices;
        const double r = std::sqrt(std::max(0.0, 1.0 - yy * yy));
        const double a = golden * k;
        m.mean.at(kNumLandmarks + k, 0) = 0.85 * r * std::cos(a);
        m.mean.at(kNumLandmarks + k, 1) = 0.95 * yy;
        m.mean.at(kNumLandmarks + k, 2) = -0.15 + 0.45 * r * std::abs(std::sin(a));
    }
    m.landmarks.resize(kNumLandmarks);
    for (int i = 0; i < kNumLandmarks; ++i) m.landmarks[static_cast<std::size_t>(i)] = i;

    std::vector<std::vector<double>> features(static_cast<std::size_t>(N));
    for (int v = 0; v < N; ++v)
        features[static_cast<std::size_t>(v)] =
            detail::smooth_features(m.mean.at(v, 0), m.mean.at(v, 1), m.mean.at(v, 2));
    const std::size_t n_feat = features[0].size();

    // One coefficient per (row, coordinate, feature); the field over
    // vertices is then a fixed smooth combination of the features.
    auto fill_basis = [&](nn::Tensor& basis, int rows) {
        basis = nn::Tensor::zeros({rows, N, 3});
        for (int j = 0; j < rows; ++j) {
            std::vector<double> coef(3 * n_feat);
            for (double& c : coef) c = rng.normal();
            for (int v = 0; v < N; ++v) {
                const auto& f = features[static_cast<std::size_t>(v)];
                for (int c = 0; c < 3; ++c) {
                    double acc = 0.0;
                    for (std::size_t q = 0; q < n_feat; ++q)
                        acc += f[q] * coef[static_cast<std::size_t>(c) * n_feat + q];
                    basis.data[(static_cast<std::size_t>(j) * N + v) * 3 + c] = acc;
                }
            }
        }
    };

    fill_basis(m.shape_basis, kShapeDims);
    detail::orthogonalize_rows(m.shape_basis, 0, kShapeDims, 1.2, 0.97);

    fill_basis(m.expr_basis, kExprDims);
    const std::size_t per_row = static_cast<std::size_t>(N) * 3;
    for (int j = 0; j < kExprDims; ++j)
        for (int v = 0; v < N; ++v) {
            const double x = m.mean.at(v, 0), y = m.mean.at(v, 1);
            const double w = j < data::kUpperDims
                                 ? std::exp(-(y + 0.26) * (y + 0.26) / (2 * 0.22 * 0.22))
                                 : std::exp(-((x * x) + (y - 0.40) * (y - 0.40)) / (2 * 0.20 * 0.20));
            for (int c = 0; c < 3; ++c)
                m.expr_basis.data[static_cast<std::size_t>(j) * per_row +
                                  static_cast<std::size_t>(v) * 3 + c] *= w;
        }
    detail::orthogonalize_rows(m.expr_basis, 0, data::kUpperDims, 0.8, 0.98);
    detail::orthogonalize_rows(m.expr_basis, data::kUpperDims, kExprDims, 0.8, 0.98);

    m.validate();
    return m;
}

inline void save_face_model(const std::filesystem::path& path, const FaceModel& model) {
    model.validate();
    io::Container c;
    c.meta["kind"] = "face_model";
    c.meta["vertices"] = model.num_vertices();
    c.tensors["mean"] = model.mean;
    c.tensors["shape_basis"] = model.shape_basis;
    c.tensors["expr_basis"] = model.expr_basis;
    nn::Tensor lm = nn::Tensor::zeros({kNumLandmarks});
    for (int i = 0; i < kNumLandmarks; ++i)
        lm.data[static_cast<std::size_t>(i)] = model.landmarks[static_cast<std::size_t>(i)];
    c.tensors["landmarks"] = lm;
    c.save(path);
}

inline FaceModel load_face_model(const std::filesystem::path& path) {
    io::Container c = io::Container::load(path);
    if (!c.meta.contains("kind") || c.meta["kind"] != "face_model")
        throw std::runtime_error("load_face_model: not a face model file: " + path.string());
    FaceModel m;
    m.mean = c.tensors.at("mean");
    m.shape_basis = c.tensors.at("shape_basis");
    m.expr_basis = c.tensors.at("expr_basis");
    const nn::Tensor& lm = c.tensors.at("landmarks");
    if (lm.shape != std::vector<int>{kNumLandmarks})
        throw std::runtime_error("load_face_model: malformed landmark table");
    m.landmarks.resize(kNumLandmarks);
    for (int i = 0; i < kNumLandmarks; ++i) {
        const double v = lm.data[static_cast<std::size_t>(i)];
        m.landmarks[static_cast<std::size_t>(i)] = static_cast<int>(v);
        if (v != std::floor(v)) throw std::runtime_error("load_face_model: non-integer landmark index");
    }
    m.validate();
    return m;
}

} // namespace tth::face
