// Copyright 2026 The listalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "listalign/tape.hpp"

#include <cmath>
#include <memory>
#include <string>

#include "listalign/error.hpp"

namespace listalign::model {

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}});
    return Var{nodes_.size() - 1};
}

Var Tape::leaf(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, true, {}});
    return Var{nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_.at(v.index).requires_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(backward) : BackwardFn{}});
    return Var{nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& node = nodes_.at(v.index);
    if (!node.requires_grad) return;
    if (g.rows() != node.value.rows() || g.cols() != node.value.cols())
        throw ShapeMismatch("Tape::accumulate: gradient shape differs from value shape");
    if (node.grad.empty()) {
        node.grad = g;
        return;
    }
    auto dst = node.grad.values();
    const auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var output) {
    if (consumed_) throw StaleTape("Tape::backward: tape already consumed");
    consumed_ = true;
    Node& out = nodes_.at(output.index);
    if (out.value.rows() != 1 || out.value.cols() != 1)
        throw ShapeMismatch("Tape::backward: output must be 1x1");
    if (!out.requires_grad) return;
    out.grad = Matrix(1, 1, 1.0);
    for (std::size_t i = output.index + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.backward || node.grad.empty()) continue;
        node.backward(*this, node.grad);
    }
}

namespace ops {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ShapeMismatch(what);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
    Matrix out = linalg::matmul(t.value(a), t.value(b));
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) tp.accumulate(a, linalg::matmul_nt(g, tp.value(b)));
        if (tp.requires_grad(b)) tp.accumulate(b, linalg::matmul_tn(tp.value(a), g));
    });
}

Var matmul_nt(Tape& t, Var a, Var b) {
    Matrix out = linalg::matmul_nt(t.value(a), t.value(b));
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) tp.accumulate(a, linalg::matmul(g, tp.value(b)));
        if (tp.requires_grad(b)) tp.accumulate(b, linalg::matmul_tn(g, tp.value(a)));
    });
}

Var add(Tape& t, Var a, Var b) {
    Matrix out = linalg::add(t.value(a), t.value(b));
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        tp.accumulate(a, g);
        tp.accumulate(b, g);
    });
}

Var add_row(Tape& t, Var x, Var bias) {
    const Matrix& xv = t.value(x);
    const Matrix& bv = t.value(bias);
    require(bv.rows() == 1 && bv.cols() == xv.cols(), "add_row: bias must be 1 x cols");
    Matrix out = xv;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
    }
    return t.record(std::move(out), {x, bias}, [x, bias](Tape& tp, const Matrix& g) {
        tp.accumulate(x, g);
        if (tp.requires_grad(bias)) {
            Matrix gb(1, g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
            tp.accumulate(bias, gb);
        }
    });
}

Var gelu(Tape& t, Var x) {
    Matrix out = t.value(x);
    for (double& v : out.values()) v = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
    return t.record(std::move(out), {x}, [x](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(x);
        Matrix gx(g.rows(), g.cols());
        const auto xs = xv.values();
        const auto gs = g.values();
        auto out_g = gx.values();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double v = xs[i];
            const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
            const double d = 0.5 * (1.0 + th) +
                             0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            out_g[i] = gs[i] * d;
        }
        tp.accumulate(x, gx);
    });
}

Var tanh(Tape& t, Var x) {
    Matrix out = t.value(x);
    for (double& v : out.values()) v = std::tanh(v);
    auto y = std::make_shared<Matrix>(out);
    return t.record(std::move(out), {x}, [x, y](Tape& tp, const Matrix& g) {
        Matrix gx = g;
        auto gs = gx.values();
        const auto ys = y->values();
        for (std::size_t i = 0; i < gs.size(); ++i) gs[i] *= 1.0 - ys[i] * ys[i];
        tp.accumulate(x, gx);
    });
}

Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps) {
    const Matrix& xv = t.value(x);
    const Matrix& gv = t.value(gamma);
    const Matrix& bv = t.value(beta);
    const std::size_t n = xv.rows();
    const std::size_t d = xv.cols();
    require(gv.rows() == 1 && gv.cols() == d && bv.rows() == 1 && bv.cols() == d,
            "layer_norm: gamma/beta must be 1 x cols");

    auto xhat = std::make_shared<Matrix>(n, d);
    auto inv_std = std::make_shared<std::vector<double>>(n);
    Matrix out(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = xv.row(i);
        double mean = 0.0;
        for (double v : r) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : r) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (r[j] - mean) * is;
            (*xhat)(i, j) = h;
            out(i, j) = h * gv(0, j) + bv(0, j);
        }
    }
    return t.record(std::move(out), {x, gamma, beta},
                    [x, gamma, beta, xhat, inv_std](Tape& tp, const Matrix& g) {
                        const std::size_t rows = g.rows();
                        const std::size_t cols = g.cols();
                        const Matrix& gam = tp.value(gamma);
                        if (tp.requires_grad(gamma) || tp.requires_grad(beta)) {
                            Matrix dg(1, cols);
                            Matrix db(1, cols);
                            for (std::size_t i = 0; i < rows; ++i)
                                for (std::size_t j = 0; j < cols; ++j) {
                                    dg(0, j) += g(i, j) * (*xhat)(i, j);
                                    db(0, j) += g(i, j);
                                }
                            tp.accumulate(gamma, dg);
                            tp.accumulate(beta, db);
                        }
                        if (!tp.requires_grad(x)) return;
                        Matrix dx(rows, cols);
                        const double inv_d = 1.0 / static_cast<double>(cols);
                        for (std::size_t i = 0; i < rows; ++i) {
                            double mean_dh = 0.0;
                            double mean_dh_h = 0.0;
                            for (std::size_t j = 0; j < cols; ++j) {
                                const double dh = g(i, j) * gam(0, j);
                                mean_dh += dh;
                                mean_dh_h += dh * (*xhat)(i, j);
                            }
                            mean_dh *= inv_d;
                            mean_dh_h *= inv_d;
                            for (std::size_t j = 0; j < cols; ++j) {
                                const double dh = g(i, j) * gam(0, j);
                                dx(i, j) = (*inv_std)[i] *
                                           (dh - mean_dh - (*xhat)(i, j) * mean_dh_h);
                            }
                        }
                        tp.accumulate(x, dx);
                    });
}

Var gather_rows(Tape& t, Var x, std::vector<std::size_t> rows) {
    Matrix out = linalg::gather_rows(t.value(x), rows);
    return t.record(std::move(out), {x}, [x, rows = std::move(rows)](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(x);
        Matrix gx(xv.rows(), xv.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto dst = gx.row(rows[i]);
            const auto src = g.row(i);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
        tp.accumulate(x, gx);
    });
}

Var segment_attention(Tape& t, Var q, Var k, Var v, std::vector<Segment> segments,
                      std::size_t heads) {
    const Matrix& qv = t.value(q);
    const Matrix& kv = t.value(k);
    const Matrix& vv = t.value(v);
    const std::size_t width = qv.cols();
    require(kv.rows() == qv.rows() && vv.rows() == qv.rows() && kv.cols() == width &&
                vv.cols() == width,
            "segment_attention: q, k, v shapes differ");
    require(heads >= 1 && width % heads == 0, "segment_attention: width not divisible by heads");
    const std::size_t dh = width / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    // probs[s * heads + h] is the length × length attention matrix.
    auto probs = std::make_shared<std::vector<Matrix>>();
    probs->reserve(segments.size() * heads);
    Matrix out(qv.rows(), width);
    for (const Segment& seg : segments) {
        require(seg.offset + seg.length <= qv.rows(), "segment_attention: segment out of range");
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t c0 = h * dh;
            Matrix p(seg.length, seg.length);
            for (std::size_t i = 0; i < seg.length; ++i) {
                const double* qi = qv.row(seg.offset + i).data() + c0;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < seg.length; ++j) {
                    const double* kj = kv.row(seg.offset + j).data() + c0;
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
                    p(i, j) = s * inv_sqrt;
                    mx = std::max(mx, p(i, j));
                }
                double z = 0.0;
                for (std::size_t j = 0; j < seg.length; ++j) {
                    p(i, j) = std::exp(p(i, j) - mx);
                    z += p(i, j);
                }
                double* oi = out.row(seg.offset + i).data() + c0;
                for (std::size_t j = 0; j < seg.length; ++j) {
                    p(i, j) /= z;
                    const double* vj = vv.row(seg.offset + j).data() + c0;
                    for (std::size_t c = 0; c < dh; ++c) oi[c] += p(i, j) * vj[c];
                }
            }
            probs->push_back(std::move(p));
        }
    }

    return t.record(
        std::move(out), {q, k, v},
        [q, k, v, segments = std::move(segments), heads, dh, inv_sqrt, probs](Tape& tp,
                                                                            const Matrix& g) {
            const Matrix& qv2 = tp.value(q);
            const Matrix& kv2 = tp.value(k);
            const Matrix& vv2 = tp.value(v);
            Matrix dq(qv2.rows(), qv2.cols());
            Matrix dk(kv2.rows(), kv2.cols());
            Matrix dv(vv2.rows(), vv2.cols());
            std::vector<double> dp;
            for (std::size_t s = 0; s < segments.size(); ++s) {
                const Segment& seg = segments[s];
                const std::size_t len = seg.length;
                dp.assign(len * len, 0.0);
                for (std::size_t h = 0; h < heads; ++h) {
                    const Matrix& p = (*probs)[s * heads + h];
                    const std::size_t c0 = h * dh;
                    // dV = Pᵀ dO ; dP = dO Vᵀ
                    for (std::size_t i = 0; i < len; ++i) {
                        const double* gi = g.row(seg.offset + i).data() + c0;
                        for (std::size_t j = 0; j < len; ++j) {
                            const double* vj = vv2.row(seg.offset + j).data() + c0;
                            double* dvj = dv.row(seg.offset + j).data() + c0;
                            double acc = 0.0;
                            for (std::size_t c = 0; c < dh; ++c) {
                                dvj[c] += p(i, j) * gi[c];
                                acc += gi[c] * vj[c];
                            }
                            dp[i * len + j] = acc;
                        }
                    }
                    // dS = P ⊙ (dP − rowsum(dP ⊙ P)), then dQ = dS K, dK = dSᵀ Q (scaled).
                    for (std::size_t i = 0; i < len; ++i) {
                        double row = 0.0;
                        for (std::size_t j = 0; j < len; ++j) row += dp[i * len + j] * p(i, j);
                        const double* qi = qv2.row(seg.offset + i).data() + c0;
                        double* dqi = dq.row(seg.offset + i).data() + c0;
                        for (std::size_t j = 0; j < len; ++j) {
                            const double ds = p(i, j) * (dp[i * len + j] - row) * inv_sqrt;
                            if (ds == 0.0) continue;
                            const double* kj = kv2.row(seg.offset + j).data() + c0;
                            double* dkj = dk.row(seg.offset + j).data() + c0;
                            for (std::size_t c = 0; c < dh; ++c) {
                                dqi[c] += ds * kj[c];
                                dkj[c] += ds * qi[c];
                            }
                        }
                    }
                }
            }
            tp.accumulate(q, dq);
            tp.accumulate(k, dk);
            tp.accumulate(v, dv);
        });
}

Var segment_mean(Tape& t, Var x, std::vector<Segment> segments) {
    const Matrix& xv = t.value(x);
    Matrix out(segments.size(), xv.cols());
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const Segment& seg = segments[s];
        require(seg.length > 0 && seg.offset + seg.length <= xv.rows(),
                "segment_mean: bad segment");
        auto dst = out.row(s);
        for (std::size_t i = 0; i < seg.length; ++i) {
            const auto src = xv.row(seg.offset + i);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
        for (double& v : dst) v /= static_cast<double>(seg.length);
    }
    return t.record(std::move(out), {x},
                    [x, segments = std::move(segments)](Tape& tp, const Matrix& g) {
                        const Matrix& xv2 = tp.value(x);
                        Matrix gx(xv2.rows(), xv2.cols());
                        for (std::size_t s = 0; s < segments.size(); ++s) {
                            const double w = 1.0 / static_cast<double>(segments[s].length);
                            for (std::size_t i = 0; i < segments[s].length; ++i) {
                                auto dst = gx.row(segments[s].offset + i);
                                const auto src = g.row(s);
                                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = w * src[j];
                            }
                        }
                        tp.accumulate(x, gx);
                    });
}

Var l2_normalize_rows(Tape& t, Var x) {
    const Matrix& xv = t.value(x);
    Matrix out(xv.rows(), xv.cols());
    auto norms = std::make_shared<std::vector<double>>(xv.rows());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        const double n = linalg::norm(xv.row(i));
        (*norms)[i] = n;
        auto dst = out.row(i);
        if (n < 1e-12) {
            if (!dst.empty()) dst[0] = 1.0;
            continue;
        }
        const auto src = xv.row(i);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] / n;
    }
    auto y = std::make_shared<Matrix>(out);
    return t.record(std::move(out), {x}, [x, y, norms](Tape& tp, const Matrix& g) {
        Matrix gx(g.rows(), g.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            const double n = (*norms)[i];
            if (n < 1e-12) continue;
            const double proj = linalg::dot(y->row(i), g.row(i));
            for (std::size_t j = 0; j < g.cols(); ++j)
                gx(i, j) = (g(i, j) - (*y)(i, j) * proj) / n;
        }
        tp.accumulate(x, gx);
    });
}

Var detach(Tape& t, Var x) { return t.constant(t.value(x)); }

Var sum(Tape& t, Var x) {
    double s = 0.0;
    for (double v : t.value(x).values()) s += v;
    return t.record(Matrix(1, 1, s), {x}, [x](Tape& tp, const Matrix& g) {
        const Matrix& xv = tp.value(x);
        tp.accumulate(x, Matrix(xv.rows(), xv.cols(), g(0, 0)));
    });
}

}  // namespace ops

}  // namespace listalign::model
