/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/face/camera.hpp
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
#include <stdexcept>

#include "tth/nn/tape.hpp"
#include "tth/nn/tensor.hpp"

namespace tth::face {

/// Perspective pinhole: focal length f = image width, principal point at
/// the image center.
struct Intrinsics {
    double f = 256.0;
    double cx = 128.0;
    double cy = 128.0;
};

inline Intrinsics intrinsics_for(int W, int H) {
    return Intrinsics{static_cast<double>(W), W / 2.0, H / 2.0};
}

/**
 * Camera pose: XYZ Euler rotation (R = Rz(rz) * Ry(ry) * Rx(rx) applied as
 * R * x), camera-frame translation with tz > 0 pushing the head in front of
 * the camera, plus intrinsics. A pose parameter vector m^hed stacks
 * (rx, ry, rz, tx, ty, tz).
 */
struct CameraPose {
    std::array<double, 3> rot{0.0, 0.0, 0.0};
    std::array<double, 3> trans{0.0, 0.0, 2.5};
    Intrinsics K;
};

inline CameraPose pose_from_params(const double* m_hed, const Intrinsics& K) {
    return CameraPose{{m_hed[0], m_hed[1], m_hed[2]}, {m_hed[3], m_hed[4], m_hed[5]}, K};
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 mat_mul(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
            r[i][j] = s;
        }
    return r;
}

inline Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}

inline Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}

inline Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

inline Mat3 rotation_matrix(const std::array<double, 3>& rot) {
    return mat_mul(rot_z(rot[2]), mat_mul(rot_y(rot[1]), rot_x(rot[0])));
}

inline Mat3 drot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{0, 0, 0}, {0, -s, -c}, {0, c, -s}}};
}

inline Mat3 drot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{-s, 0, c}, {0, 0, 0}, {-c, 0, -s}}};
}

inline Mat3 drot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{-s, -c, 0}, {c, -s, 0}, {0, 0, 0}}};
}

/// dR/d(rot[axis]) for R = Rz * Ry * Rx.
inline Mat3 rotation_derivative(const std::array<double, 3>& rot, int axis) {
    switch (axis) {
        case 0: return mat_mul(rot_z(rot[2]), mat_mul(rot_y(rot[1]), drot_x(rot[0])));
        case 1: return mat_mul(rot_z(rot[2]), mat_mul(drot_y(rot[1]), rot_x(rot[0])));
        default: return mat_mul(drot_z(rot[2]), mat_mul(rot_y(rot[1]), rot_x(rot[0])));
    }
}

inline constexpr double kMinDepth = 1e-6;

/// p = (f X/Z + cx, f Y/Z + cy) after cam = R x + t; throws if any point
/// lands at non-positive depth.
inline nn::Tensor project(const nn::Tensor& points, const CameraPose& pose) {
    if (points.rank() != 2 || points.cols() != 3)
        throw std::invalid_argument("project: points must be N x 3");
    const Mat3 R = rotation_matrix(pose.rot);
    const int N = points.rows();
    nn::Tensor out = nn::Tensor::zeros({N, 2});
    for (int i = 0; i < N; ++i) {
        const double x = points.at(i, 0), y = points.at(i, 1), z = points.at(i, 2);
        const double X = R[0][0] * x + R[0][1] * y + R[0][2] * z + pose.trans[0];
        const double Y = R[1][0] * x + R[1][1] * y + R[1][2] * z + pose.trans[1];
        const double Z = R[2][0] * x + R[2][1] * y + R[2][2] * z + pose.trans[2];
        if (Z < kMinDepth) throw std::runtime_error("project: non-positive depth");
        out.at(i, 0) = pose.K.f * X / Z + pose.K.cx;
        out.at(i, 1) = pose.K.f * Y / Z + pose.K.cy;
    }
    return out;
}

/**
 * Differentiable rigid-transform-and-project tape node. `points` is an
 * N x 3 node, `pose6` a 6-entry node (rx, ry, rz, tx, ty, tz); the output
 * is N x 2 pixel coordinates. The backward closure scatters into both
 * parents with hand-derived Jacobians.
 */
inline int rigid_project(nn::Tape& t, int points, int pose6, const Intrinsics& K) {
    const nn::Tensor& P = t.val(points);
    const nn::Tensor& q = t.val(pose6);
    if (P.rank() != 2 || P.cols() != 3)
        throw std::invalid_argument("rigid_project: points must be N x 3");
    if (q.numel() != 6) throw std::invalid_argument("rigid_project: pose must have 6 entries");
    const std::array<double, 3> rot{q.data[0], q.data[1], q.data[2]};
    const std::array<double, 3> trans{q.data[3], q.data[4], q.data[5]};
    const Mat3 R = rotation_matrix(rot);
    const int N = P.rows();

    nn::Tensor cam = nn::Tensor::zeros({N, 3});
    nn::Tensor out = nn::Tensor::zeros({N, 2});
    for (int i = 0; i < N; ++i) {
        const double x = P.at(i, 0), y = P.at(i, 1), z = P.at(i, 2);
        for (int r = 0; r < 3; ++r)
            cam.at(i, r) = R[r][0] * x + R[r][1] * y + R[r][2] * z + trans[static_cast<std::size_t>(r)];
        if (cam.at(i, 2) < kMinDepth) throw std::runtime_error("rigid_project: non-positive depth");
        out.at(i, 0) = K.f * cam.at(i, 0) / cam.at(i, 2) + K.cx;
        out.at(i, 1) = K.f * cam.at(i, 1) / cam.at(i, 2) + K.cy;
    }

    const Mat3 dR0 = rotation_derivative(rot, 0);
    const Mat3 dR1 = rotation_derivative(rot, 1);
    const Mat3 dR2 = rotation_derivative(rot, 2);
    const double f = K.f;
    return t.add_node(
        std::move(out), {points, pose6},
        [points, pose6, R, dR0, dR1, dR2, f, cam](nn::Tape& tp, int self) {
            const nn::Tensor& G = tp.grad(self);
            const nn::Tensor& Pts = tp.val(points);
            const int n = Pts.rows();
            const bool wp = tp.wants(points), wq = tp.wants(pose6);
            nn::Tensor* gp = wp ? &tp.grad(points) : nullptr;
            nn::Tensor* gq = wq ? &tp.grad(pose6) : nullptr;
            const std::array<const Mat3*, 3> dRs{&dR0, &dR1, &dR2};
            for (int i = 0; i < n; ++i) {
                const double X = cam.at(i, 0), Y = cam.at(i, 1), Z = cam.at(i, 2);
                const double gu = G.at(i, 0), gv = G.at(i, 1);
                // dL/dcam via du/dcam = (f/Z, 0, -f X/Z^2), dv/dcam likewise
                const double gcx = gu * f / Z;
                const double gcy = gv * f / Z;
                const double gcz = -(gu * X + gv * Y) * f / (Z * Z);
                if (gp)
                    for (int c = 0; c < 3; ++c)
                        gp->at(i, c) += R[0][c] * gcx + R[1][c] * gcy + R[2][c] * gcz;
                if (gq) {
                    const double x = Pts.at(i, 0), y = Pts.at(i, 1), z = Pts.at(i, 2);
                    for (int a = 0; a < 3; ++a) {
                        const Mat3& D = *dRs[static_cast<std::size_t>(a)];
                        const double dx = D[0][0] * x + D[0][1] * y + D[0][2] * z;
                        const double dy = D[1][0] * x + D[1][1] * y + D[1][2] * z;
                        const double dz = D[2][0] * x + D[2][1] * y + D[2][2] * z;
                        gq->data[static_cast<std::size_t>(a)] += gcx * dx + gcy * dy + gcz * dz;
                    }
                    gq->data[3] += gcx;
                    gq->data[4] += gcy;
                    gq->data[5] += gcz;
                }
            }
        },
        "rigid_project");
}

} // namespace tth::face
