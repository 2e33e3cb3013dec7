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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "listalign/linalg.hpp"

namespace listalign::codec {

using linalg::Matrix;

/// n vectors of `bytes_per_vector` one-byte codes each.
struct CodeBlock {
    std::size_t n = 0;
    std::size_t bytes_per_vector = 0;
    std::vector<std::uint8_t> codes;

    [[nodiscard]] std::span<const std::uint8_t> row(std::size_t i) const {
        return {codes.data() + i * bytes_per_vector, bytes_per_vector};
    }
    bool operator==(const CodeBlock&) const = default;
};

// ---------------------------------------------------------------------------
// Product quantization

struct PqParams {
    std::size_t m = 8;        ///< sub-spaces
    std::size_t k = 256;      ///< centroids per sub-space, at most 256
    std::size_t iters = 25;   ///< Lloyd iterations per sub-space
    std::uint64_t seed = 0;
};

/// Inputs narrower than m · sub_dim are zero-padded on the right.
struct PqCodebook {
    std::size_t input_dim = 0;
    std::size_t m = 0;
    std::size_t k = 0;
    std::size_t sub_dim = 0;
    /// (m · k) × sub_dim; row s·k + c is centroid c of sub-space s.
    Matrix codebooks;

    [[nodiscard]] std::size_t padded_dim() const noexcept { return m * sub_dim; }
    bool operator==(const PqCodebook&) const = default;
};

PqCodebook pq_train(const Matrix& x, const PqParams& params);
CodeBlock pq_encode(const PqCodebook& cb, const Matrix& x);
Matrix pq_decode(const PqCodebook& cb, const CodeBlock& codes);

// ---------------------------------------------------------------------------
// Optimal product quantization (non-parametric: Lloyd + Procrustes)

struct OpqParams {
    std::size_t m = 8;
    std::size_t k = 256;
    std::size_t rotated_dim = 0;   ///< 0 means "same as the input dimension"
    std::size_t outer_iters = 10;
    std::size_t init_iters = 25;   ///< Lloyd iterations for the initial PQ
    std::size_t inner_iters = 4;   ///< warm-started Lloyd iterations per outer step
    std::uint64_t seed = 0;
};

struct OpqCodec {
    std::size_t input_dim = 0;
    std::size_t rotated_dim = 0;
    /// rotated_dim × rotated_dim; a padded row vector x maps to x · rotation.
    Matrix rotation;
    PqCodebook pq;

    bool operator==(const OpqCodec&) const = default;
};

/// `objective`, when given, receives the total squared reconstruction error
/// after the initial PQ and after every outer iteration.
OpqCodec opq_train(const Matrix& x, const OpqParams& params,
                   std::vector<double>* objective = nullptr);
CodeBlock opq_encode(const OpqCodec& codec, const Matrix& x);
Matrix opq_decode(const OpqCodec& codec, const CodeBlock& codes);

// ---------------------------------------------------------------------------
// 8-bit scalar quantization

struct ScalarQuantizer {
    std::vector<double> min;
    std::vector<double> scale;  ///< (max − min) / 255, or 1 for constant columns

    [[nodiscard]] std::size_t dim() const noexcept { return min.size(); }
    bool operator==(const ScalarQuantizer&) const = default;
};

ScalarQuantizer scalar_quantize_fit(const Matrix& x);
/// Round-half-to-even onto [0, 255]; values outside the fitted range clamp.
CodeBlock scalar_encode(const ScalarQuantizer& q, const Matrix& x);
Matrix scalar_decode(const ScalarQuantizer& q, const CodeBlock& codes);

// ---------------------------------------------------------------------------
// PCA reduction followed by 8-bit scalar quantization (one byte per kept dim)

struct PcaCodec {
    linalg::PcaModel pca;
    ScalarQuantizer quantizer;

    bool operator==(const PcaCodec& other) const {
        return pca.mean == other.pca.mean && pca.components == other.pca.components &&
               pca.explained_variance == other.pca.explained_variance &&
               quantizer == other.quantizer;
    }
};

PcaCodec pca_codec_fit(const Matrix& x, std::size_t dims);
CodeBlock pca_encode(const PcaCodec& codec, const Matrix& x);
Matrix pca_decode(const PcaCodec& codec, const CodeBlock& codes);

// ---------------------------------------------------------------------------

enum class CodecKind : std::uint8_t { kPq = 0, kOpq = 1, kScalar = 2, kPca = 3 };

using AnyCodec = std::variant<PqCodebook, OpqCodec, ScalarQuantizer, PcaCodec>;

CodecKind kind_of(const AnyCodec& codec);
std::size_t input_dim(const AnyCodec& codec);
std::size_t bytes_per_vector(const AnyCodec& codec);
CodeBlock encode(const AnyCodec& codec, const Matrix& x);
Matrix decode(const AnyCodec& codec, const CodeBlock& codes);

// ---------------------------------------------------------------------------

inline constexpr std::array<double, 6> kReportPercentiles{0.05, 0.25, 0.50, 0.75, 0.90, 0.99};

/// Per-vector L2 reconstruction error summary.
struct CompressionReport {
    std::array<double, 6> l2{};          ///< at kReportPercentiles
    std::array<double, 6> relative_l2{};  ///< L2 error divided by ‖x‖
    double mean_l2 = 0.0;
    double mean_relative_l2 = 0.0;
    std::size_t n = 0;
};

CompressionReport compression_report(const Matrix& x, const Matrix& x_hat);

/// Percent reduction of `candidate` relative to `baseline`, per percentile.
std::array<double, 6> relative_reduction(const CompressionReport& baseline,
                                         const CompressionReport& candidate);

}  // namespace listalign::codec
