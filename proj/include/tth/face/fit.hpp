/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/face/fit.hpp
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

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tth/face/camera.hpp"
#include "tth/face/model.hpp"
#include "tth/nn/tape.hpp"

namespace tth::face {

inline constexpr int kPoseDims = 6;
inline constexpr int kFrameDims = kPoseDims + kExprDims; // 57 per keyframe

/// Landmark-consistency problem: observed 68-point sets for N_k keyframes
/// plus the regularizer weights on expression and shape parameters.
struct FitProblem {
    std::vector<nn::Tensor> keyframes; // each 68 x 2
    double lambda_e = 1e-4;
    double lambda_s = 1e-4;
    Intrinsics K;

    void validate() const {
        if (keyframes.empty()) throw std::invalid_argument("FitProblem: no keyframes");
        for (const auto& p : keyframes) {
            if (p.shape != std::vector<int>{kNumLandmarks, 2})
                throw std::invalid_argument("FitProblem: keyframe landmarks must be 68 x 2");
            if (!p.all_finite()) throw std::invalid_argument("FitProblem: non-finite landmarks");
        }
        if (lambda_e < 0.0 || lambda_s < 0.0)
            throw std::invalid_argument("FitProblem: negative regularizer weight");
    }
};

/// Variable set X = (s, {pose_k, e_k}).
struct FitState {
    std::vector<double> s; // 60
    std::vector<std::array<double, kPoseDims>> poses;
    std::vector<std::vector<double>> exprs; // each 51
};

struct FitResult {
    FitState state;
    std::vector<double> f_history; // F at X0 then after each accepted step
    int iterations = 0;
    double grad_norm = 0.0;
    double mean_reprojection_error = 0.0;
    bool converged = false;
};

namespace detail {

/// F(X) for one keyframe without the shape regularizer; infinity when a
/// point collapses behind the camera.
inline double keyframe_objective(const LandmarkBases& lb, const nn::Tensor& obs,
                                 const Intrinsics& K, const std::vector<double>& s,
                                 const std::array<double, kPoseDims>& pose,
                                 const std::vector<double>& e, double lambda_e) {
    nn::Tensor pts = landmark_positions(lb, s, e);
    nn::Tensor proj;
    try {
        proj = project(pts, CameraPose{{pose[0], pose[1], pose[2]}, {pose[3], pose[4], pose[5]}, K});
    } catch (const std::runtime_error&) {
        return std::numeric_limits<double>::infinity();
    }
    double f = 0.0;
    for (std::size_t i = 0; i < proj.data.size(); ++i) {
        const double d = proj.data[i] - obs.data[i];
        f += d * d;
    }
    for (double v : e) f += lambda_e * v * v;
    return f;
}

inline double objective(const LandmarkBases& lb, const FitProblem& problem, const FitState& X) {
    double f = 0.0;
    for (std::size_t k = 0; k < problem.keyframes.size(); ++k) {
        f += keyframe_objective(lb, problem.keyframes[k], problem.K, X.s, X.poses[k], X.exprs[k],
                                problem.lambda_e);
        if (!std::isfinite(f)) return std::numeric_limits<double>::infinity();
    }
    for (double v : X.s) f += problem.lambda_s * v * v;
    return f;
}

/// Projection residual block and its Jacobian for one keyframe, by one
/// backward sweep per residual row through a throwaway tape.
struct KeyframeBlock {
    Eigen::MatrixXd Js; // 136 x 60
    Eigen::MatrixXd Jy; // 136 x 57 (pose then expression)
    Eigen::VectorXd r;  // 136
};

inline KeyframeBlock keyframe_block(const LandmarkBases& lb, const nn::Tensor& obs,
                                    const Intrinsics& K, const std::vector<double>& s,
                                    const std::array<double, kPoseDims>& pose,
                                    const std::vector<double>& e, bool with_s) {
    nn::Tape t;
    nn::Tensor s_t = nn::Tensor::zeros({1, kShapeDims});
    for (int j = 0; j < kShapeDims; ++j) s_t.data[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)];
    nn::Tensor pose_t = nn::Tensor::zeros({kPoseDims});
    for (int j = 0; j < kPoseDims; ++j) pose_t.data[static_cast<std::size_t>(j)] = pose[static_cast<std::size_t>(j)];
    nn::Tensor e_t = nn::Tensor::zeros({1, kExprDims});
    for (int j = 0; j < kExprDims; ++j) e_t.data[static_cast<std::size_t>(j)] = e[static_cast<std::size_t>(j)];

    const int s_node = t.leaf(s_t, with_s);
    const int pose_node = t.leaf(pose_t, true);
    const int e_node = t.leaf(e_t, true);
    int flat = t.add(t.add(t.matmul(s_node, t.constant(lb.shape_mat)),
                           t.matmul(e_node, t.constant(lb.expr_mat))),
                     t.constant(lb.mean));
    const int pts = t.reshape(flat, {kNumLandmarks, 3});
    const int proj = rigid_project(t, pts, pose_node, K);
    const int res = t.sub(proj, t.constant(obs));

    const int rows = 2 * kNumLandmarks;
    KeyframeBlock blk;
    blk.Js = Eigen::MatrixXd::Zero(rows, kShapeDims);
    blk.Jy = Eigen::MatrixXd::Zero(rows, kFrameDims);
    blk.r = Eigen::VectorXd::Zero(rows);
    for (int row = 0; row < rows; ++row) blk.r(row) = t.val(res).data[static_cast<std::size_t>(row)];

    nn::Tensor seed = nn::Tensor::zeros({kNumLandmarks, 2});
    for (int row = 0; row < rows; ++row) {
        seed.data[static_cast<std::size_t>(row)] = 1.0;
        t.backward(res, seed);
        seed.data[static_cast<std::size_t>(row)] = 0.0;
        if (with_s) {
            const nn::Tensor& gs = t.grad(s_node);
            for (int j = 0; j < kShapeDims; ++j) blk.Js(row, j) = gs.data[static_cast<std::size_t>(j)];
        }
        const nn::Tensor& gp = t.grad(pose_node);
        for (int j = 0; j < kPoseDims; ++j) blk.Jy(row, j) = gp.data[static_cast<std::size_t>(j)];
        const nn::Tensor& ge = t.grad(e_node);
        for (int j = 0; j < kExprDims; ++j)
            blk.Jy(row, kPoseDims + j) = ge.data[static_cast<std::size_t>(j)];
    }
    return blk;
}

inline double mean_reprojection(const LandmarkBases& lb, const FitProblem& problem,
                                const FitState& X) {
    double acc = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < problem.keyframes.size(); ++k) {
        const nn::Tensor pts = landmark_positions(lb, X.s, X.exprs[k]);
        const auto& pose = X.poses[k];
        const nn::Tensor proj =
            project(pts, CameraPose{{pose[0], pose[1], pose[2]}, {pose[3], pose[4], pose[5]}, problem.K});
        for (int i = 0; i < kNumLandmarks; ++i) {
            const double du = proj.at(i, 0) - problem.keyframes[k].at(i, 0);
            const double dv = proj.at(i, 1) - problem.keyframes[k].at(i, 1);
            acc += std::sqrt(du * du + dv * dv);
            ++n;
        }
    }
    return acc / n;
}

} // namespace detail

/**
 * Initial guess: s = 0, e_k = 0; per keyframe the pose is picked from a
 * coarse yaw/pitch grid over {-30, 0, 30} degrees, with tz from the ratio
 * of model width to observed pixel spread and (tx, ty) back-projected from
 * the landmark centroid.
 */
inline FitState default_init(const LandmarkBases& lb, const FitProblem& problem) {
    problem.validate();
    FitState X;
    X.s.assign(kShapeDims, 0.0);

    double model_w = 0.0;
    {
        double lo = std::numeric_limits<double>::max(), hi = -lo;
        for (int i = 0; i < kNumLandmarks; ++i) {
            const double x = lb.mean.data[static_cast<std::size_t>(3 * i)];
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        model_w = hi - lo;
    }

    const std::vector<double> zero_e(kExprDims, 0.0);
    constexpr double pi = 3.14159265358979323846;
    const double grid[3] = {-pi / 6.0, 0.0, pi / 6.0};
    for (const auto& obs : problem.keyframes) {
        double ulo = std::numeric_limits<double>::max(), uhi = -ulo;
        double ubar = 0.0, vbar = 0.0;
        for (int i = 0; i < kNumLandmarks; ++i) {
            ulo = std::min(ulo, obs.at(i, 0));
            uhi = std::max(uhi, obs.at(i, 0));
            ubar += obs.at(i, 0);
            vbar += obs.at(i, 1);
        }
        ubar /= kNumLandmarks;
        vbar /= kNumLandmarks;
        const double px_w = std::max(uhi - ulo, 1.0);
        const double tz = std::clamp(problem.K.f * model_w / px_w, 0.5, 50.0);
        const double tx = (ubar - problem.K.cx) * tz / problem.K.f;
        const double ty = (vbar - problem.K.cy) * tz / problem.K.f;

        std::array<double, kPoseDims> best{0, 0, 0, tx, ty, tz};
        double best_f = std::numeric_limits<double>::infinity();
        for (double ry : grid)
            for (double rx : grid) {
                const std::array<double, kPoseDims> cand{rx, ry, 0.0, tx, ty, tz};
                const double f =
                    detail::keyframe_objective(lb, obs, problem.K, X.s, cand, zero_e, problem.lambda_e);
                if (f < best_f) {
                    best_f = f;
                    best = cand;
                }
            }
        X.poses.push_back(best);
        X.exprs.push_back(zero_e);
    }
    return X;
}

/**
 * Levenberg-Marquardt minimization of
 *   F(X) = sum_k ( sum_i |p_ki - P(U(s, e_k)_i, pose_k)|^2 + lambda_e |e_k|^2 )
 *        + lambda_s |s|^2
 * with Marquardt diagonal damping (x10 on reject, /10 on accept) and a
 * Schur complement on s over the per-keyframe 57-dim blocks. Terminates on
 * gradient norm < 1e-8, accepted-step norm < 1e-10, damping overflow, or
 * `max_iterations` linear solves.
 */
inline FitResult fit(const FaceModel& model, const FitProblem& problem, const FitState& init,
                     int max_iterations = 200) {
    problem.validate();
    const LandmarkBases lb = landmark_bases(model);
    const int Nk = static_cast<int>(problem.keyframes.size());
    if (static_cast<int>(init.poses.size()) != Nk || static_cast<int>(init.exprs.size()) != Nk ||
        static_cast<int>(init.s.size()) != kShapeDims)
        throw std::invalid_argument("fit: initial state does not match the problem");

    FitResult res;
    res.state = init;
    double F = detail::objective(lb, problem, res.state);
    if (!std::isfinite(F)) throw std::invalid_argument("fit: initial guess has non-positive depths");
    res.f_history.push_back(F);

    double mu = 1e-3;
    bool rebuild = true;

    Eigen::MatrixXd A_ss(kShapeDims, kShapeDims);
    Eigen::VectorXd g_s(kShapeDims);
    std::vector<Eigen::MatrixXd> A_sy(static_cast<std::size_t>(Nk));
    std::vector<Eigen::MatrixXd> A_yy(static_cast<std::size_t>(Nk));
    std::vector<Eigen::VectorXd> g_y(static_cast<std::size_t>(Nk));

    while (res.iterations < max_iterations) {
        if (rebuild) {
            A_ss = problem.lambda_s * Eigen::MatrixXd::Identity(kShapeDims, kShapeDims);
            g_s = problem.lambda_s *
                  Eigen::Map<const Eigen::VectorXd>(res.state.s.data(), kShapeDims);
            for (int k = 0; k < Nk; ++k) {
                const auto blk = detail::keyframe_block(lb, problem.keyframes[static_cast<std::size_t>(k)],
                                                        problem.K, res.state.s,
                                                        res.state.poses[static_cast<std::size_t>(k)],
                                                        res.state.exprs[static_cast<std::size_t>(k)], true);
                A_ss.noalias() += blk.Js.transpose() * blk.Js;
                A_sy[static_cast<std::size_t>(k)] = blk.Js.transpose() * blk.Jy;
                Eigen::MatrixXd ayy = blk.Jy.transpose() * blk.Jy;
                Eigen::VectorXd gy = blk.Jy.transpose() * blk.r;
                for (int j = 0; j < kExprDims; ++j) {
                    ayy(kPoseDims + j, kPoseDims + j) += problem.lambda_e;
                    gy(kPoseDims + j) +=
                        problem.lambda_e *
                        res.state.exprs[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                }
                A_yy[static_cast<std::size_t>(k)] = std::move(ayy);
                g_y[static_cast<std::size_t>(k)] = std::move(gy);
                g_s.noalias() += blk.Js.transpose() * blk.r;
            }
            double gn = 4.0 * g_s.squaredNorm();
            for (int k = 0; k < Nk; ++k) gn += 4.0 * g_y[static_cast<std::size_t>(k)].squaredNorm();
            res.grad_norm = std::sqrt(gn);
            rebuild = false;
            if (res.grad_norm < 1e-8) {
                res.converged = true;
                break;
            }
        }

        // damped normal equations via the Schur complement on s
        Eigen::MatrixXd S = A_ss;
        for (int j = 0; j < kShapeDims; ++j) S(j, j) += mu * std::max(A_ss(j, j), 1e-12);
        Eigen::VectorXd rhs = -g_s;
        std::vector<Eigen::LDLT<Eigen::MatrixXd>> facts;
        facts.reserve(static_cast<std::size_t>(Nk));
        for (int k = 0; k < Nk; ++k) {
            Eigen::MatrixXd ayy = A_yy[static_cast<std::size_t>(k)];
            for (int j = 0; j < kFrameDims; ++j) ayy(j, j) += mu * std::max(ayy(j, j), 1e-12);
            facts.emplace_back(ayy);
            const Eigen::MatrixXd w =
                facts.back().solve(A_sy[static_cast<std::size_t>(k)].transpose());
            S.noalias() -= A_sy[static_cast<std::size_t>(k)] * w;
            rhs.noalias() +=
                A_sy[static_cast<std::size_t>(k)] * facts.back().solve(g_y[static_cast<std::size_t>(k)]);
        }
        const Eigen::VectorXd ds = S.ldlt().solve(rhs);

        FitState trial = res.state;
        double step_sq = ds.squaredNorm();
        for (int j = 0; j < kShapeDims; ++j) trial.s[static_cast<std::size_t>(j)] += ds(j);
        for (int k = 0; k < Nk; ++k) {
            const Eigen::VectorXd dy = facts[static_cast<std::size_t>(k)].solve(
                (-g_y[static_cast<std::size_t>(k)] -
                 A_sy[static_cast<std::size_t>(k)].transpose() * ds)
                    .eval());
            step_sq += dy.squaredNorm();
            for (int j = 0; j < kPoseDims; ++j)
                trial.poses[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] += dy(j);
            for (int j = 0; j < kExprDims; ++j)
                trial.exprs[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)] +=
                    dy(kPoseDims + j);
        }
        ++res.iterations;

        const double F_trial = detail::objective(lb, problem, trial);
        if (F_trial < F) {
            res.state = std::move(trial);
            F = F_trial;
            res.f_history.push_back(F);
            mu = std::max(mu / 10.0, 1e-15);
            rebuild = true;
            if (std::sqrt(step_sq) < 1e-10) {
                res.converged = true;
                break;
            }
        } else {
            mu *= 10.0;
            if (mu > 1e15) break;
            if (std::sqrt(step_sq) < 1e-10) {
                res.converged = true;
                break;
            }
        }
    }

    res.mean_reprojection_error = detail::mean_reprojection(lb, problem, res.state);
    return res;
}

inline FitResult fit(const FaceModel& model, const FitProblem& problem, int max_iterations = 200) {
    const LandmarkBases lb = landmark_bases(model);
    return fit(model, problem, default_init(lb, problem), max_iterations);
}

/// One frame of per-frame refinement with s held fixed.
struct FrameFit {
    std::array<double, kPoseDims> pose{};
    std::vector<double> e;
    double reprojection_error = 0.0;
};

/**
 * Sequence fitting for style extraction: s stays fixed, each frame solves a
 * 57-dim LM problem warm-started from the previous frame (frame 0 from the
 * coarse grid init).
 */
inline std::vector<FrameFit> fit_sequence(const FaceModel& model, const std::vector<double>& s,
                                          const std::vector<nn::Tensor>& frames,
                                          const Intrinsics& K, double lambda_e = 1e-4,
                                          int max_iterations = 60) {
    if (static_cast<int>(s.size()) != kShapeDims)
        throw std::invalid_argument("fit_sequence: s must have 60 entries");
    if (frames.empty()) throw std::invalid_argument("fit_sequence: no frames");
    const LandmarkBases lb = landmark_bases(model);

    std::vector<FrameFit> out;
    out.reserve(frames.size());
    std::array<double, kPoseDims> pose{};
    std::vector<double> e(kExprDims, 0.0);
    bool warm = false;

    for (const auto& obs : frames) {
        if (obs.shape != std::vector<int>{kNumLandmarks, 2})
            throw std::invalid_argument("fit_sequence: frame landmarks must be 68 x 2");
        if (!warm) {
            FitProblem one;
            one.keyframes = {obs};
            one.lambda_e = lambda_e;
            one.lambda_s = 0.0;
            one.K = K;
            FitState st = default_init(lb, one);
            st.s = s;
            pose = st.poses[0];
            e.assign(kExprDims, 0.0);
            warm = true;
        }

        double F = detail::keyframe_objective(lb, obs, K, s, pose, e, lambda_e);
        if (!std::isfinite(F)) throw std::invalid_argument("fit_sequence: warm start behind camera");
        double mu = 1e-3;
        bool rebuild = true;
        Eigen::MatrixXd A(kFrameDims, kFrameDims);
        Eigen::VectorXd g(kFrameDims);
        int iters = 0;
        while (iters < max_iterations) {
            if (rebuild) {
                const auto blk = detail::keyframe_block(lb, obs, K, s, pose, e, false);
                A = blk.Jy.transpose() * blk.Jy;
                g = blk.Jy.transpose() * blk.r;
                for (int j = 0; j < kExprDims; ++j) {
                    A(kPoseDims + j, kPoseDims + j) += lambda_e;
                    g(kPoseDims + j) += lambda_e * e[static_cast<std::size_t>(j)];
                }
                rebuild = false;
                if (2.0 * g.norm() < 1e-8) break;
            }
            Eigen::MatrixXd Ad = A;
            for (int j = 0; j < kFrameDims; ++j) Ad(j, j) += mu * std::max(A(j, j), 1e-12);
            const Eigen::VectorXd dy = Ad.ldlt().solve(-g);
            ++iters;

            auto pose_t = pose;
            auto e_t = e;
            for (int j = 0; j < kPoseDims; ++j) pose_t[static_cast<std::size_t>(j)] += dy(j);
            for (int j = 0; j < kExprDims; ++j) e_t[static_cast<std::size_t>(j)] += dy(kPoseDims + j);
            const double F_trial = detail::keyframe_objective(lb, obs, K, s, pose_t, e_t, lambda_e);
            if (F_trial < F) {
                pose = pose_t;
                e = e_t;
                F = F_trial;
                mu = std::max(mu / 10.0, 1e-15);
                rebuild = true;
                if (dy.norm() < 1e-10) break;
            } else {
                mu *= 10.0;
                if (mu > 1e15 || dy.norm() < 1e-10) break;
            }
        }

        FrameFit ff;
        ff.pose = pose;
        ff.e = e;
        const nn::Tensor pts = landmark_positions(lb, s, e);
        const nn::Tensor proj =
            project(pts, CameraPose{{pose[0], pose[1], pose[2]}, {pose[3], pose[4], pose[5]}, K});
        double acc = 0.0;
        for (int i = 0; i < kNumLandmarks; ++i) {
            const double du = proj.at(i, 0) - obs.at(i, 0);
            const double dv = proj.at(i, 1) - obs.at(i, 1);
            acc += std::sqrt(du * du + dv * dv);
        }
        ff.reprojection_error = acc / kNumLandmarks;
        out.push_back(std::move(ff));
    }
    return out;
}

/**
 * Landmarks for one animation frame: the expression is assembled as
 * (m^upp, m^mou) matching the basis row order, evaluated at the fitted s
 * and projected with pose m^hed.
 */
inline nn::Tensor drive_landmarks(const LandmarkBases& lb, const std::vector<double>& s,
                                  const double* m_hed, const double* m_upp, const double* m_mou,
                                  const Intrinsics& K) {
    std::vector<double> e(kExprDims);
    for (int j = 0; j < data::kUpperDims; ++j) e[static_cast<std::size_t>(j)] = m_upp[j];
    for (int j = 0; j < data::kMouthDims; ++j)
        e[static_cast<std::size_t>(data::kUpperDims + j)] = m_mou[j];
    const nn::Tensor pts = landmark_positions(lb, s, e);
    return project(pts, pose_from_params(m_hed, K));
}

} // namespace tth::face
