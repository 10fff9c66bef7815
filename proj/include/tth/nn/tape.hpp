/*
 * tth - deterministic text-to-talking-head animation pipeline
 *
 * File: include/tth/nn/tape.hpp
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

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tth/nn/tensor.hpp"

namespace tth::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

enum class Pad { Same, Valid };

/**
 * Reverse-mode tape. Every operation appends a node holding the forward
 * value and a closure that scatters the node's gradient into its parents.
 * Nodes are created in topological order, so the backward sweep is a single
 * reverse pass over the node list. All reductions run in fixed index order;
 * identical inputs give bit-identical values and gradients.
 */
class Tape {
public:
    using BackFn = std::function<void(Tape&, int)>;

    struct Node {
        Tensor value;
        Tensor grad; // empty until touched by backward
        bool requires_grad = false;
        std::vector<int> parents;
        BackFn back;
    };

    /// Scan op outputs for NaN/inf; cheap insurance that is on by default
    /// and switched off only by the heavy training loops.
    bool check_finite = true;

    int leaf(Tensor value, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, {}, nullptr});
        return static_cast<int>(nodes_.size()) - 1;
    }

    int constant(Tensor value) { return leaf(std::move(value), false); }

    /// Append an externally defined operation. The backward closure receives
    /// the tape and the node id and must accumulate into parents it wants.
    int add_node(Tensor value, std::vector<int> parents, BackFn back, const char* op_name = "op") {
        if (check_finite && !value.all_finite())
            throw std::runtime_error(std::string("non-finite intermediate in ") + op_name);
        bool req = false;
        for (int p : parents) req = req || nodes_[static_cast<std::size_t>(p)].requires_grad;
        nodes_.push_back(Node{std::move(value), Tensor{}, req, std::move(parents), std::move(back)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    const Tensor& val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    bool wants(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

    /// Gradient buffer of a node, allocated to zeros on first access.
    Tensor& grad(int id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
        return n.grad;
    }

    bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.data.empty(); }

    std::size_t size() const { return nodes_.size(); }

    /**
     * Reverse sweep from `out` seeded with `seed` (same shape as the output
     * value). Every call recomputes gradients from scratch, so one tape can
     * serve several backward passes, one output row at a time.
     */
    void backward(int out, const Tensor& seed) {
        Node& o = nodes_[static_cast<std::size_t>(out)];
        if (!o.value.same_shape(seed))
            throw std::invalid_argument("backward: seed shape does not match output");
        if (!o.requires_grad) return;
        for (Node& n : nodes_) n.grad = Tensor{};
        {
            Tensor& g = grad(out);
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += seed.data[i];
        }
        for (int id = out; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (!n.requires_grad || n.grad.data.empty() || !n.back) continue;
            n.back(*this, id);
        }
    }

    void backward_scalar(int out) { backward(out, Tensor::scalar(1.0)); }

    // ---- elementwise -------------------------------------------------------

    int add(int a, int b) {
        require_same_shape(val(a), val(b), "add");
        Tensor out = val(a);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += val(b).data[i];
        return add_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
            }
        }, "add");
    }

    int sub(int a, int b) {
        require_same_shape(val(a), val(b), "sub");
        Tensor out = val(a);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= val(b).data[i];
        return add_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
            }
        }, "sub");
    }

    int mul(int a, int b) {
        require_same_shape(val(a), val(b), "mul");
        Tensor out = val(a);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= val(b).data[i];
        return add_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& va = t.val(a);
            const Tensor& vb = t.val(b);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * vb.data[i];
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * va.data[i];
            }
        }, "mul");
    }

    int div(int a, int b) {
        require_same_shape(val(a), val(b), "div");
        Tensor out = val(a);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= val(b).data[i];
        return add_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& va = t.val(a);
            const Tensor& vb = t.val(b);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] / vb.data[i];
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (std::size_t i = 0; i < g.data.size(); ++i)
                    gb.data[i] -= g.data[i] * va.data[i] / (vb.data[i] * vb.data[i]);
            }
        }, "div");
    }

    int scale(int a, double c) {
        Tensor out = val(a);
        for (double& v : out.data) v *= c;
        return add_node(std::move(out), {a}, [a, c](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += c * g.data[i];
        }, "scale");
    }

    int add_scalar(int a, double c) {
        Tensor out = val(a);
        for (double& v : out.data) v += c;
        return add_node(std::move(out), {a}, [a](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }, "add_scalar");
    }

    int relu(int a) {
        Tensor out = val(a);
        for (double& v : out.data) v = v > 0.0 ? v : 0.0;
        return add_node(std::move(out), {a}, [a](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& va = t.val(a);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (va.data[i] > 0.0) ga.data[i] += g.data[i];
        }, "relu");
    }

    int tanh_op(int a) {
        Tensor out = val(a);
        for (double& v : out.data) v = std::tanh(v);
        return add_node(std::move(out), {a}, [a](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& y = t.val(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
        }, "tanh");
    }

    int sigmoid_op(int a) {
        Tensor out = val(a);
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
        return add_node(std::move(out), {a}, [a](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& y = t.val(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
        }, "sigmoid");
    }

    int abs_op(int a) {
        Tensor out = val(a);
        for (double& v : out.data) v = std::abs(v);
        return add_node(std::move(out), {a}, [a](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& va = t.val(a);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                const double s = va.data[i] > 0.0 ? 1.0 : (va.data[i] < 0.0 ? -1.0 : 0.0);
                ga.data[i] += g.data[i] * s;
            }
        }, "abs");
    }

    int square(int a) {
        Tensor out = val(a);
        for (double& v : out.data) v *= v;
        return add_node(std::move(out), {a}, [a](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& va = t.val(a);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i)
                ga.data[i] += 2.0 * g.data[i] * va.data[i];
        }, "square");
    }

    // ---- reductions --------------------------------------------------------

    int sum_all(int a) {
        double s = 0.0;
        for (double v : val(a).data) s += v;
        return add_node(Tensor::scalar(s), {a}, [a](Tape& t, int self) {
            const double g = t.grad(self).data[0];
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (double& v : ga.data) v += g;
        }, "sum_all");
    }

    int mean_all(int a) {
        const double n = static_cast<double>(val(a).numel());
        double s = 0.0;
        for (double v : val(a).data) s += v;
        return add_node(Tensor::scalar(s / n), {a}, [a, n](Tape& t, int self) {
            const double g = t.grad(self).data[0] / n;
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (double& v : ga.data) v += g;
        }, "mean_all");
    }

    /// Column means of a T x D tensor -> D.
    int mean_axis0(int a) {
        const Tensor& x = val(a);
        if (x.rank() != 2) throw std::invalid_argument("mean_axis0: rank-2 input required");
        const int T = x.rows(), D = x.cols();
        Tensor out = Tensor::zeros({D});
        for (int t = 0; t < T; ++t)
            for (int j = 0; j < D; ++j) out.data[static_cast<std::size_t>(j)] += x.at(t, j);
        for (double& v : out.data) v /= T;
        return add_node(std::move(out), {a}, [a, T, D](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (int r = 0; r < T; ++r)
                for (int j = 0; j < D; ++j) ga.at(r, j) += g.data[static_cast<std::size_t>(j)] / T;
        }, "mean_axis0");
    }

    // ---- shape -------------------------------------------------------------

    int reshape(int a, std::vector<int> new_shape) {
        if (Tensor::numel_of(new_shape) != val(a).numel())
            throw std::invalid_argument("reshape: numel mismatch");
        Tensor out(std::move(new_shape), val(a).data);
        return add_node(std::move(out), {a}, [a](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
        }, "reshape");
    }

    /// Rows [r0, r1) of a 2-D tensor.
    int slice_rows(int a, int r0, int r1) {
        const Tensor& x = val(a);
        if (x.rank() != 2 || r0 < 0 || r1 > x.rows() || r0 >= r1)
            throw std::invalid_argument("slice_rows: bad range");
        const int D = x.cols();
        Tensor out = Tensor::zeros({r1 - r0, D});
        std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(r0) * D,
                  x.data.begin() + static_cast<std::ptrdiff_t>(r1) * D, out.data.begin());
        return add_node(std::move(out), {a}, [a, r0, D](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (int r = 0; r < g.rows(); ++r)
                for (int j = 0; j < D; ++j) ga.at(r0 + r, j) += g.at(r, j);
        }, "slice_rows");
    }

    /// Zero-pad a 2-D tensor with extra rows at the end.
    int pad_rows(int a, int total_rows) {
        const Tensor& x = val(a);
        if (x.rank() != 2 || total_rows < x.rows())
            throw std::invalid_argument("pad_rows: bad target length");
        const int T = x.rows(), D = x.cols();
        Tensor out = Tensor::zeros({total_rows, D});
        std::copy(x.data.begin(), x.data.end(), out.data.begin());
        return add_node(std::move(out), {a}, [a, T, D](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (int r = 0; r < T; ++r)
                for (int j = 0; j < D; ++j) ga.at(r, j) += g.at(r, j);
        }, "pad_rows");
    }

    /// Repeat a length-D vector into rows x D.
    int broadcast_row(int v, int rows) {
        const Tensor& x = val(v);
        if (x.rank() != 1) throw std::invalid_argument("broadcast_row: rank-1 input required");
        const int D = x.dim(0);
        Tensor out = Tensor::zeros({rows, D});
        for (int r = 0; r < rows; ++r)
            std::copy(x.data.begin(), x.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r) * D);
        return add_node(std::move(out), {v}, [v, rows, D](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(v)) return;
            Tensor& gv = t.grad(v);
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < D; ++j) gv.data[static_cast<std::size_t>(j)] += g.at(r, j);
        }, "broadcast_row");
    }

    /// Subtract a length-D row vector from every row of a T x D tensor.
    int sub_rowvec(int a, int v) {
        const Tensor& x = val(a);
        const Tensor& r = val(v);
        if (x.rank() != 2 || r.rank() != 1 || x.cols() != r.dim(0))
            throw std::invalid_argument("sub_rowvec: shape mismatch");
        const int T = x.rows(), D = x.cols();
        Tensor out = x;
        for (int t = 0; t < T; ++t)
            for (int j = 0; j < D; ++j) out.at(t, j) -= r.data[static_cast<std::size_t>(j)];
        return add_node(std::move(out), {a, v}, [a, v, T, D](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
            }
            if (t.wants(v)) {
                Tensor& gv = t.grad(v);
                for (int r2 = 0; r2 < T; ++r2)
                    for (int j = 0; j < D; ++j) gv.data[static_cast<std::size_t>(j)] -= g.at(r2, j);
            }
        }, "sub_rowvec");
    }

    /// Concatenate along the last dimension; leading dimensions must agree.
    int concat_lastdim(int a, int b) {
        const Tensor& x = val(a);
        const Tensor& y = val(b);
        if (x.rank() != y.rank() || x.rank() < 2)
            throw std::invalid_argument("concat_lastdim: rank mismatch");
        for (int i = 0; i + 1 < x.rank(); ++i)
            if (x.dim(i) != y.dim(i)) throw std::invalid_argument("concat_lastdim: leading dims differ");
        const int ca = x.shape.back(), cb = y.shape.back();
        const std::int64_t lead = x.numel() / ca;
        std::vector<int> os = x.shape;
        os.back() = ca + cb;
        Tensor out = Tensor::zeros(os);
        for (std::int64_t r = 0; r < lead; ++r) {
            std::copy(x.data.begin() + r * ca, x.data.begin() + (r + 1) * ca,
                      out.data.begin() + r * (ca + cb));
            std::copy(y.data.begin() + r * cb, y.data.begin() + (r + 1) * cb,
                      out.data.begin() + r * (ca + cb) + ca);
        }
        return add_node(std::move(out), {a, b}, [a, b, ca, cb, lead](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                for (std::int64_t r = 0; r < lead; ++r)
                    for (int j = 0; j < ca; ++j) ga.data[r * ca + j] += g.data[r * (ca + cb) + j];
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (std::int64_t r = 0; r < lead; ++r)
                    for (int j = 0; j < cb; ++j) gb.data[r * cb + j] += g.data[r * (ca + cb) + ca + j];
            }
        }, "concat_lastdim");
    }

    /// Spatial crop of an H x W x C tensor.
    int crop2d(int a, int y0, int x0, int h, int w) {
        const Tensor& x = val(a);
        if (x.rank() != 3) throw std::invalid_argument("crop2d: rank-3 input required");
        const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
        if (h <= 0 || w <= 0 || y0 < 0 || x0 < 0 || y0 + h > H || x0 + w > W)
            throw std::invalid_argument("crop2d: degenerate or out-of-bounds box");
        Tensor out = Tensor::zeros({h, w, C});
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
                for (int c = 0; c < C; ++c) out.at(yy, xx, c) = x.at(y0 + yy, x0 + xx, c);
        return add_node(std::move(out), {a}, [a, y0, x0, h, w, C](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(a)) return;
            Tensor& ga = t.grad(a);
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx)
                    for (int c = 0; c < C; ++c) ga.at(y0 + yy, x0 + xx, c) += g.at(yy, xx, c);
        }, "crop2d");
    }

    /// a (.. x C) * m (.. x 1), mask broadcast over the channel dimension.
    int mul_bcast_lastdim(int a, int m) {
        const Tensor& x = val(a);
        const Tensor& mk = val(m);
        if (x.rank() != mk.rank() || mk.shape.back() != 1)
            throw std::invalid_argument("mul_bcast_lastdim: mask must have last dim 1");
        for (int i = 0; i + 1 < x.rank(); ++i)
            if (x.dim(i) != mk.dim(i)) throw std::invalid_argument("mul_bcast_lastdim: leading dims differ");
        const int C = x.shape.back();
        const std::int64_t lead = x.numel() / C;
        Tensor out = x;
        for (std::int64_t r = 0; r < lead; ++r) {
            const double mv = mk.data[static_cast<std::size_t>(r)];
            for (int c = 0; c < C; ++c) out.data[r * C + c] *= mv;
        }
        return add_node(std::move(out), {a, m}, [a, m, C, lead](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& x2 = t.val(a);
            const Tensor& mk2 = t.val(m);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                for (std::int64_t r = 0; r < lead; ++r) {
                    const double mv = mk2.data[static_cast<std::size_t>(r)];
                    for (int c = 0; c < C; ++c) ga.data[r * C + c] += g.data[r * C + c] * mv;
                }
            }
            if (t.wants(m)) {
                Tensor& gm = t.grad(m);
                for (std::int64_t r = 0; r < lead; ++r) {
                    double s = 0.0;
                    for (int c = 0; c < C; ++c) s += g.data[r * C + c] * x2.data[r * C + c];
                    gm.data[static_cast<std::size_t>(r)] += s;
                }
            }
        }, "mul_bcast_lastdim");
    }

    // ---- linear algebra ----------------------------------------------------

    /// (M x K) @ (K x N).
    int matmul(int a, int b) {
        const Tensor& x = val(a);
        const Tensor& y = val(b);
        if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows())
            throw std::invalid_argument("matmul: shape mismatch");
        const int M = x.rows(), K = x.cols(), N = y.cols();
        Tensor out = Tensor::zeros({M, N});
        MapRM(out.data.data(), M, N) =
            CMapRM(x.data.data(), M, K) * CMapRM(y.data.data(), K, N);
        return add_node(std::move(out), {a, b}, [a, b, M, K, N](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            CMapRM gm(g.data.data(), M, N);
            if (t.wants(a)) {
                Tensor& ga = t.grad(a);
                MapRM(ga.data.data(), M, K) += gm * CMapRM(t.val(b).data.data(), K, N).transpose();
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                MapRM(gb.data.data(), K, N) += CMapRM(t.val(a).data.data(), M, K).transpose() * gm;
            }
        }, "matmul");
    }

    /// x (R x In) @ W (In x Out) + b (Out), bias broadcast over rows.
    int linear(int x, int W, int b) {
        const Tensor& xv = val(x);
        const Tensor& wv = val(W);
        const Tensor& bv = val(b);
        if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1 || xv.cols() != wv.rows() ||
            wv.cols() != bv.dim(0))
            throw std::invalid_argument("linear: shape mismatch");
        const int R = xv.rows(), In = xv.cols(), Out = wv.cols();
        Tensor out = Tensor::zeros({R, Out});
        MapRM om(out.data.data(), R, Out);
        om = CMapRM(xv.data.data(), R, In) * CMapRM(wv.data.data(), In, Out);
        for (int r = 0; r < R; ++r)
            for (int j = 0; j < Out; ++j) out.at(r, j) += bv.data[static_cast<std::size_t>(j)];
        return add_node(std::move(out), {x, W, b}, [x, W, b, R, In, Out](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            CMapRM gm(g.data.data(), R, Out);
            if (t.wants(x)) {
                Tensor& gx = t.grad(x);
                MapRM(gx.data.data(), R, In) += gm * CMapRM(t.val(W).data.data(), In, Out).transpose();
            }
            if (t.wants(W)) {
                Tensor& gw = t.grad(W);
                MapRM(gw.data.data(), In, Out) += CMapRM(t.val(x).data.data(), R, In).transpose() * gm;
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (int r = 0; r < R; ++r)
                    for (int j = 0; j < Out; ++j) gb.data[static_cast<std::size_t>(j)] += g.at(r, j);
            }
        }, "linear");
    }

    /// Row lookup: table (V x E), indices length T -> T x E.
    int embed(int table, std::vector<int> indices) {
        const Tensor& tb = val(table);
        if (tb.rank() != 2) throw std::invalid_argument("embed: table must be rank 2");
        const int V = tb.rows(), E = tb.cols();
        const int T = static_cast<int>(indices.size());
        for (int idx : indices)
            if (idx < 0 || idx >= V) throw std::out_of_range("embed: index out of vocab range");
        Tensor out = Tensor::zeros({T, E});
        for (int t = 0; t < T; ++t)
            std::copy(tb.data.begin() + static_cast<std::ptrdiff_t>(indices[static_cast<std::size_t>(t)]) * E,
                      tb.data.begin() + static_cast<std::ptrdiff_t>(indices[static_cast<std::size_t>(t)] + 1) * E,
                      out.data.begin() + static_cast<std::ptrdiff_t>(t) * E);
        auto idx_shared = std::make_shared<std::vector<int>>(std::move(indices));
        return add_node(std::move(out), {table}, [table, idx_shared, E](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(table)) return;
            Tensor& gt = t.grad(table);
            const auto& idx = *idx_shared;
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < E; ++j)
                    gt.at(idx[r], j) += g.data[r * static_cast<std::size_t>(E) + static_cast<std::size_t>(j)];
        }, "embed");
    }

    // ---- convolutions ------------------------------------------------------

    /**
     * 1-D convolution. x: T x Cin, w: K x Cin x Cout, b: Cout.
     * Same padding keeps length ceil(T/stride); valid padding requires the
     * effective kernel to fit. Zero padding at sequence boundaries.
     */
    int conv1d(int x, int w, int b, int stride = 1, int dilation = 1, Pad pad = Pad::Same) {
        const Tensor& xv = val(x);
        const Tensor& wv = val(w);
        const Tensor& bv = val(b);
        if (xv.rank() != 2 || wv.rank() != 3 || bv.rank() != 1)
            throw std::invalid_argument("conv1d: bad ranks");
        const int T = xv.dim(0), Cin = xv.dim(1);
        const int K = wv.dim(0), Cout = wv.dim(2);
        if (wv.dim(1) != Cin || bv.dim(0) != Cout)
            throw std::invalid_argument("conv1d: channel mismatch");
        if (stride < 1 || dilation < 1) throw std::invalid_argument("conv1d: bad stride/dilation");
        const int keff = (K - 1) * dilation + 1;
        int pad_left = 0, L = 0;
        if (pad == Pad::Same) {
            if (K % 2 == 0) throw std::invalid_argument("conv1d: same padding requires odd kernel");
            pad_left = (keff - 1) / 2;
            L = (T - 1) / stride + 1;
        } else {
            if (T < keff) throw std::invalid_argument("conv1d: input shorter than kernel");
            L = (T - keff) / stride + 1;
        }

        RowMat patches = im2col_1d(xv, K, stride, dilation, pad_left, L);
        Tensor out = Tensor::zeros({L, Cout});
        MapRM om(out.data.data(), L, Cout);
        om = patches * CMapRM(wv.data.data(), K * Cin, Cout);
        for (int l = 0; l < L; ++l)
            for (int j = 0; j < Cout; ++j) out.at(l, j) += bv.data[static_cast<std::size_t>(j)];

        return add_node(std::move(out), {x, w, b},
                        [x, w, b, K, Cin, Cout, T, L, stride, dilation, pad_left](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            CMapRM gm(g.data.data(), L, Cout);
            if (t.wants(w)) {
                RowMat patches = im2col_1d(t.val(x), K, stride, dilation, pad_left, L);
                Tensor& gw = t.grad(w);
                MapRM(gw.data.data(), K * Cin, Cout) += patches.transpose() * gm;
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (int l = 0; l < L; ++l)
                    for (int j = 0; j < Cout; ++j) gb.data[static_cast<std::size_t>(j)] += g.at(l, j);
            }
            if (t.wants(x)) {
                RowMat dpatch = gm * CMapRM(t.val(w).data.data(), K * Cin, Cout).transpose();
                Tensor& gx = t.grad(x);
                for (int l = 0; l < L; ++l)
                    for (int k = 0; k < K; ++k) {
                        const int tt = l * stride + k * dilation - pad_left;
                        if (tt < 0 || tt >= T) continue;
                        for (int ci = 0; ci < Cin; ++ci) gx.at(tt, ci) += dpatch(l, k * Cin + ci);
                    }
            }
        }, "conv1d");
    }

    /**
     * Adjoint of the same-padding strided conv1d with the same weight tensor:
     * maps L x Cout back to out_len x Cin, where L = ceil(out_len / stride).
     * <conv1d(x), y> == <x, conv1d_transpose(y)> exactly up to rounding.
     */
    int conv1d_transpose(int y, int w, int b, int stride, int out_len) {
        const Tensor& yv = val(y);
        const Tensor& wv = val(w);
        const Tensor& bv = val(b);
        if (yv.rank() != 2 || wv.rank() != 3 || bv.rank() != 1)
            throw std::invalid_argument("conv1d_transpose: bad ranks");
        const int L = yv.dim(0), Cout = yv.dim(1);
        const int K = wv.dim(0), Cin = wv.dim(1);
        if (wv.dim(2) != Cout || bv.dim(0) != Cin)
            throw std::invalid_argument("conv1d_transpose: channel mismatch");
        if (K % 2 == 0) throw std::invalid_argument("conv1d_transpose: odd kernel required");
        if ((out_len - 1) / stride + 1 != L)
            throw std::invalid_argument("conv1d_transpose: out_len inconsistent with stride");
        const int pad_left = (K - 1) / 2;

        Tensor out = Tensor::zeros({out_len, Cin});
        for (int l = 0; l < L; ++l)
            for (int k = 0; k < K; ++k) {
                const int tt = l * stride + k - pad_left;
                if (tt < 0 || tt >= out_len) continue;
                for (int ci = 0; ci < Cin; ++ci) {
                    double s = 0.0;
                    for (int co = 0; co < Cout; ++co)
                        s += yv.at(l, co) * wv.data[(static_cast<std::size_t>(k) * Cin + ci) * Cout + co];
                    out.at(tt, ci) += s;
                }
            }
        for (int tt = 0; tt < out_len; ++tt)
            for (int ci = 0; ci < Cin; ++ci) out.at(tt, ci) += bv.data[static_cast<std::size_t>(ci)];

        return add_node(std::move(out), {y, w, b},
                        [y, w, b, K, Cin, Cout, L, out_len, stride, pad_left](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            const Tensor& yv2 = t.val(y);
            const Tensor& wv2 = t.val(w);
            if (t.wants(y)) {
                Tensor& gy = t.grad(y);
                for (int l = 0; l < L; ++l)
                    for (int k = 0; k < K; ++k) {
                        const int tt = l * stride + k - pad_left;
                        if (tt < 0 || tt >= out_len) continue;
                        for (int co = 0; co < Cout; ++co) {
                            double s = 0.0;
                            for (int ci = 0; ci < Cin; ++ci)
                                s += g.at(tt, ci) *
                                     wv2.data[(static_cast<std::size_t>(k) * Cin + ci) * Cout + co];
                            gy.at(l, co) += s;
                        }
                    }
            }
            if (t.wants(w)) {
                Tensor& gw = t.grad(w);
                for (int l = 0; l < L; ++l)
                    for (int k = 0; k < K; ++k) {
                        const int tt = l * stride + k - pad_left;
                        if (tt < 0 || tt >= out_len) continue;
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int co = 0; co < Cout; ++co)
                                gw.data[(static_cast<std::size_t>(k) * Cin + ci) * Cout + co] +=
                                    g.at(tt, ci) * yv2.at(l, co);
                    }
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (int tt = 0; tt < out_len; ++tt)
                    for (int ci = 0; ci < Cin; ++ci) gb.data[static_cast<std::size_t>(ci)] += g.at(tt, ci);
            }
        }, "conv1d_transpose");
    }

    /**
     * 2-D convolution with same zero padding. x: H x W x Cin,
     * w: K x K x Cin x Cout, b: Cout. Output ceil(H/s) x ceil(W/s) x Cout.
     */
    int conv2d(int x, int w, int b, int stride = 1) {
        const Tensor& xv = val(x);
        const Tensor& wv = val(w);
        const Tensor& bv = val(b);
        if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1)
            throw std::invalid_argument("conv2d: bad ranks");
        const int H = xv.dim(0), W = xv.dim(1), Cin = xv.dim(2);
        const int K = wv.dim(0), Cout = wv.dim(3);
        if (wv.dim(1) != K || wv.dim(2) != Cin || bv.dim(0) != Cout)
            throw std::invalid_argument("conv2d: channel mismatch");
        if (K % 2 == 0) throw std::invalid_argument("conv2d: odd kernel required");
        if (stride < 1) throw std::invalid_argument("conv2d: bad stride");
        const int pad = (K - 1) / 2;
        const int OH = (H - 1) / stride + 1, OW = (W - 1) / stride + 1;

        RowMat patches = im2col_2d(xv, K, stride, pad, OH, OW);
        Tensor out = Tensor::zeros({OH, OW, Cout});
        MapRM om(out.data.data(), OH * OW, Cout);
        om = patches * CMapRM(wv.data.data(), K * K * Cin, Cout);
        for (int r = 0; r < OH * OW; ++r)
            for (int j = 0; j < Cout; ++j) out.data[static_cast<std::size_t>(r) * Cout + j] += bv.data[static_cast<std::size_t>(j)];

        return add_node(std::move(out), {x, w, b},
                        [x, w, b, K, Cin, Cout, H, W, OH, OW, stride, pad](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            CMapRM gm(g.data.data(), OH * OW, Cout);
            if (t.wants(w)) {
                RowMat patches = im2col_2d(t.val(x), K, stride, pad, OH, OW);
                Tensor& gw = t.grad(w);
                MapRM(gw.data.data(), K * K * Cin, Cout) += patches.transpose() * gm;
            }
            if (t.wants(b)) {
                Tensor& gb = t.grad(b);
                for (int r = 0; r < OH * OW; ++r)
                    for (int j = 0; j < Cout; ++j)
                        gb.data[static_cast<std::size_t>(j)] += g.data[static_cast<std::size_t>(r) * Cout + j];
            }
            if (t.wants(x)) {
                RowMat dpatch = gm * CMapRM(t.val(w).data.data(), K * K * Cin, Cout).transpose();
                Tensor& gx = t.grad(x);
                for (int oy = 0; oy < OH; ++oy)
                    for (int ox = 0; ox < OW; ++ox) {
                        const int row = oy * OW + ox;
                        for (int ky = 0; ky < K; ++ky) {
                            const int yy = oy * stride + ky - pad;
                            if (yy < 0 || yy >= H) continue;
                            for (int kx = 0; kx < K; ++kx) {
                                const int xx = ox * stride + kx - pad;
                                if (xx < 0 || xx >= W) continue;
                                const int col0 = (ky * K + kx) * Cin;
                                for (int ci = 0; ci < Cin; ++ci)
                                    gx.at(yy, xx, ci) += dpatch(row, col0 + ci);
                            }
                        }
                    }
            }
        }, "conv2d");
    }

    /// k x k average pooling with stride k; spatial dims must divide by k.
    int avgpool2d(int x, int k) {
        const Tensor& xv = val(x);
        if (xv.rank() != 3) throw std::invalid_argument("avgpool2d: rank-3 input required");
        const int H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
        if (k < 1 || H % k != 0 || W % k != 0)
            throw std::invalid_argument("avgpool2d: dims must be divisible by k");
        const int OH = H / k, OW = W / k;
        const double inv = 1.0 / (k * k);
        Tensor out = Tensor::zeros({OH, OW, C});
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox)
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx)
                        for (int c = 0; c < C; ++c)
                            out.at(oy, ox, c) += xv.at(oy * k + dy, ox * k + dx, c) * inv;
        return add_node(std::move(out), {x}, [x, k, OH, OW, C, inv](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(x)) return;
            Tensor& gx = t.grad(x);
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox)
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx)
                            for (int c = 0; c < C; ++c)
                                gx.at(oy * k + dy, ox * k + dx, c) += g.at(oy, ox, c) * inv;
        }, "avgpool2d");
    }

    /// Nearest-neighbour upsampling by factor k.
    int upsample2d(int x, int k) {
        const Tensor& xv = val(x);
        if (xv.rank() != 3) throw std::invalid_argument("upsample2d: rank-3 input required");
        const int H = xv.dim(0), W = xv.dim(1), C = xv.dim(2);
        Tensor out = Tensor::zeros({H * k, W * k, C});
        for (int y = 0; y < H * k; ++y)
            for (int x2 = 0; x2 < W * k; ++x2)
                for (int c = 0; c < C; ++c) out.at(y, x2, c) = xv.at(y / k, x2 / k, c);
        return add_node(std::move(out), {x}, [x, k, H, W, C](Tape& t, int self) {
            const Tensor& g = t.grad(self);
            if (!t.wants(x)) return;
            Tensor& gx = t.grad(x);
            for (int y = 0; y < H * k; ++y)
                for (int x2 = 0; x2 < W * k; ++x2)
                    for (int c = 0; c < C; ++c) gx.at(y / k, x2 / k, c) += g.at(y, x2, c);
        }, "upsample2d");
    }

private:
    static RowMat im2col_1d(const Tensor& x, int K, int stride, int dilation, int pad_left, int L) {
        const int T = x.dim(0), Cin = x.dim(1);
        RowMat patches = RowMat::Zero(L, K * Cin);
        for (int l = 0; l < L; ++l)
            for (int k = 0; k < K; ++k) {
                const int tt = l * stride + k * dilation - pad_left;
                if (tt < 0 || tt >= T) continue;
                for (int ci = 0; ci < Cin; ++ci) patches(l, k * Cin + ci) = x.at(tt, ci);
            }
        return patches;
    }

    static RowMat im2col_2d(const Tensor& x, int K, int stride, int pad, int OH, int OW) {
        const int H = x.dim(0), W = x.dim(1), Cin = x.dim(2);
        RowMat patches = RowMat::Zero(OH * OW, K * K * Cin);
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                const int row = oy * OW + ox;
                for (int ky = 0; ky < K; ++ky) {
                    const int yy = oy * stride + ky - pad;
                    if (yy < 0 || yy >= H) continue;
                    for (int kx = 0; kx < K; ++kx) {
                        const int xx = ox * stride + kx - pad;
                        if (xx < 0 || xx >= W) continue;
                        const int col0 = (ky * K + kx) * Cin;
                        for (int ci = 0; ci < Cin; ++ci) patches(row, col0 + ci) = x.at(yy, xx, ci);
                    }
                }
            }
        return patches;
    }

    std::vector<Node> nodes_;
};

} // namespace tth::nn
