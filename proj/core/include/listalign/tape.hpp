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

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "listalign/linalg.hpp"

namespace listalign::model {

using linalg::Matrix;

/// Handle to a value recorded on a Tape.
struct Var {
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::size_t index = kNone;

    [[nodiscard]] bool valid() const noexcept { return index != kNone; }
};

/// Reverse-mode gradient tape over dense matrices. Values are recorded in
/// evaluation order; `backward` walks them in reverse exactly once.
class Tape {
public:
    /// Receives the gradient of the recorded output and accumulates into inputs.
    using BackwardFn = std::function<void(Tape&, const Matrix& output_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) noexcept = default;
    Tape& operator=(Tape&&) noexcept = default;

    Var constant(Matrix value);
    /// A value gradients flow into.
    Var leaf(Matrix value);
    /// Records an op output. The backward function is kept only when at least
    /// one input requires a gradient.
    Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);

    [[nodiscard]] const Matrix& value(Var v) const { return nodes_.at(v.index).value; }
    /// Empty until backward reaches the node.
    [[nodiscard]] const Matrix& grad(Var v) const { return nodes_.at(v.index).grad; }
    [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.index).requires_grad; }

    /// Adds `g` into the gradient of `v`; no-op when `v` needs no gradient.
    void accumulate(Var v, const Matrix& g);

    /// Seeds d(output)/d(output) = 1 for a 1×1 output and propagates. A tape
    /// can be consumed once; a second call throws StaleTape.
    void backward(Var output);
    [[nodiscard]] bool consumed() const noexcept { return consumed_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

/// Contiguous block of token rows belonging to one set.
struct Segment {
    std::size_t offset = 0;
    std::size_t length = 0;
};

namespace ops {

Var matmul(Tape& t, Var a, Var b);
/// a · bᵀ
Var matmul_nt(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
/// x + bias broadcast over rows; bias is 1 × cols.
Var add_row(Tape& t, Var x, Var bias);
/// tanh-approximated GELU.
Var gelu(Tape& t, Var x);
Var tanh(Tape& t, Var x);
/// Row-wise layer normalization with per-column gain and shift (1 × cols).
Var layer_norm(Tape& t, Var x, Var gamma, Var beta, double eps = 1e-5);
/// Output row i is row rows[i] of x; gradients scatter-add back.
Var gather_rows(Tape& t, Var x, std::vector<std::size_t> rows);
/// Multi-head scaled dot-product self-attention restricted to each segment.
/// q, k, v are T × d_model; heads split the columns evenly.
Var segment_attention(Tape& t, Var q, Var k, Var v, std::vector<Segment> segments,
                      std::size_t heads);
/// One row per segment: the mean of its rows.
Var segment_mean(Tape& t, Var x, std::vector<Segment> segments);
/// Rows scaled to unit norm. A row with norm below 1e-12 maps to the first
/// standard basis vector and passes no gradient.
Var l2_normalize_rows(Tape& t, Var x);
/// Same value, no gradient path.
Var detach(Tape& t, Var x);
/// Sum of all entries as a 1×1 value.
Var sum(Tape& t, Var x);

}  // namespace ops

}  // namespace listalign::model
