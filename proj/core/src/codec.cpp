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

#include "listalign/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "listalign/error.hpp"

namespace listalign::codec {

namespace {

void require_cols(const Matrix& x, std::size_t expected, const char* op) {
    if (x.cols() != expected) {
        throw ShapeMismatch(std::string(op) + ": expected " + std::to_string(expected) +
                            " columns, got " + std::to_string(x.cols()));
    }
}

void require_codes(const CodeBlock& codes, std::size_t bytes, const char* op) {
    if (codes.bytes_per_vector != bytes || codes.codes.size() != codes.n * bytes) {
        throw ShapeMismatch(std::string(op) + ": code block has " +
                            std::to_string(codes.bytes_per_vector) + " bytes per vector, expected " +
                            std::to_string(bytes));
    }
}

void validate_pq_shape(std::size_t n, std::size_t m, std::size_t k) {
    if (m == 0) throw DegenerateInput("pq: m must be at least 1");
    if (k == 0 || k > 256) throw DegenerateInput("pq: k must be in [1, 256]");
    if (n < k) {
        throw DegenerateInput("pq: need at least k=" + std::to_string(k) +
                              " training vectors, got " + std::to_string(n));
    }
}

/// Trains sub-space codebooks on data whose width is already m · sub_dim.
PqCodebook train_padded(const Matrix& padded, std::size_t input_dim, std::size_t m,
                        std::size_t k, std::size_t iters, std::uint64_t seed) {
    PqCodebook cb;
    cb.input_dim = input_dim;
    cb.m = m;
    cb.k = k;
    cb.sub_dim = padded.cols() / m;
    cb.codebooks = Matrix(m * k, cb.sub_dim);
    for (std::size_t s = 0; s < m; ++s) {
        const Matrix slice = linalg::column_slice(padded, s * cb.sub_dim, cb.sub_dim);
        const auto km = linalg::kmeans_fit(slice, k, iters, linalg::derive_seed(seed, s));
        for (std::size_t c = 0; c < k; ++c) {
            const auto src = km.centroids.row(c);
            std::copy(src.begin(), src.end(), cb.codebooks.row(s * k + c).begin());
        }
    }
    return cb;
}

void refine_padded(PqCodebook& cb, const Matrix& padded, std::size_t iters) {
    for (std::size_t s = 0; s < cb.m; ++s) {
        const Matrix slice = linalg::column_slice(padded, s * cb.sub_dim, cb.sub_dim);
        Matrix start(cb.k, cb.sub_dim);
        for (std::size_t c = 0; c < cb.k; ++c) {
            const auto src = cb.codebooks.row(s * cb.k + c);
            std::copy(src.begin(), src.end(), start.row(c).begin());
        }
        const auto km = linalg::kmeans_refine(slice, std::move(start), iters);
        for (std::size_t c = 0; c < cb.k; ++c) {
            const auto src = km.centroids.row(c);
            std::copy(src.begin(), src.end(), cb.codebooks.row(s * cb.k + c).begin());
        }
    }
}

CodeBlock encode_padded(const PqCodebook& cb, const Matrix& padded) {
    CodeBlock out{padded.rows(), cb.m, std::vector<std::uint8_t>(padded.rows() * cb.m)};
    for (std::size_t i = 0; i < padded.rows(); ++i) {
        const auto x = padded.row(i);
        for (std::size_t s = 0; s < cb.m; ++s) {
            const auto sub = x.subspan(s * cb.sub_dim, cb.sub_dim);
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < cb.k; ++c) {
                const double d = linalg::squared_distance(cb.codebooks.row(s * cb.k + c), sub);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            out.codes[i * cb.m + s] = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

Matrix decode_padded(const PqCodebook& cb, const CodeBlock& codes) {
    require_codes(codes, cb.m, "pq_decode");
    Matrix out(codes.n, cb.padded_dim());
    for (std::size_t i = 0; i < codes.n; ++i) {
        auto dst = out.row(i);
        for (std::size_t s = 0; s < cb.m; ++s) {
            const std::size_t c = codes.codes[i * cb.m + s];
            if (c >= cb.k) throw ShapeMismatch("pq_decode: code exceeds codebook size");
            const auto src = cb.codebooks.row(s * cb.k + c);
            std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(s * cb.sub_dim));
        }
    }
    return out;
}

Matrix truncate_columns(const Matrix& x, std::size_t cols) {
    return cols == x.cols() ? x : linalg::column_slice(x, 0, cols);
}

}  // namespace

// ---------------------------------------------------------------------------

PqCodebook pq_train(const Matrix& x, const PqParams& params) {
    validate_pq_shape(x.rows(), params.m, params.k);
    if (x.cols() == 0) throw DegenerateInput("pq_train: zero-width input");
    const std::size_t sub_dim = (x.cols() + params.m - 1) / params.m;
    const Matrix padded = linalg::pad_columns(x, sub_dim * params.m);
    PqCodebook cb = train_padded(padded, x.cols(), params.m, params.k, params.iters, params.seed);
    linalg::round_to_f32(cb.codebooks);
    return cb;
}

CodeBlock pq_encode(const PqCodebook& cb, const Matrix& x) {
    require_cols(x, cb.input_dim, "pq_encode");
    return encode_padded(cb, linalg::pad_columns(x, cb.padded_dim()));
}

Matrix pq_decode(const PqCodebook& cb, const CodeBlock& codes) {
    return truncate_columns(decode_padded(cb, codes), cb.input_dim);
}

// ---------------------------------------------------------------------------

OpqCodec opq_train(const Matrix& x, const OpqParams& params, std::vector<double>* objective) {
    const std::size_t d = x.cols();
    const std::size_t rotated = params.rotated_dim == 0 ? d : params.rotated_dim;
    validate_pq_shape(x.rows(), params.m, params.k);
    if (d == 0) throw DegenerateInput("opq_train: zero-width input");
    if (rotated < d) throw DegenerateInput("opq_train: rotated_dim smaller than input dim");
    if (rotated % params.m != 0) {
        throw DegenerateInput("opq_train: rotated_dim " + std::to_string(rotated) +
                              " not divisible by m=" + std::to_string(params.m));
    }

    const Matrix padded = linalg::pad_columns(x, rotated);
    OpqCodec codec;
    codec.input_dim = d;
    codec.rotated_dim = rotated;
    codec.rotation = Matrix::identity(rotated);
    codec.pq = train_padded(padded, rotated, params.m, params.k, params.init_iters, params.seed);

    Matrix recon = decode_padded(codec.pq, encode_padded(codec.pq, padded));
    if (objective != nullptr) {
        objective->clear();
        objective->push_back(linalg::squared_frobenius_distance(padded, recon));
    }

    for (std::size_t it = 0; it < params.outer_iters; ++it) {
        codec.rotation = linalg::procrustes(padded, recon);
        const Matrix rotated_x = linalg::matmul(padded, codec.rotation);
        refine_padded(codec.pq, rotated_x, params.inner_iters);
        recon = decode_padded(codec.pq, encode_padded(codec.pq, rotated_x));
        if (objective != nullptr)
            objective->push_back(linalg::squared_frobenius_distance(rotated_x, recon));
    }

    if (params.outer_iters > 0) linalg::round_to_f32(codec.rotation);
    linalg::round_to_f32(codec.pq.codebooks);
    return codec;
}

CodeBlock opq_encode(const OpqCodec& codec, const Matrix& x) {
    require_cols(x, codec.input_dim, "opq_encode");
    const Matrix padded = linalg::pad_columns(x, codec.rotated_dim);
    return encode_padded(codec.pq, linalg::matmul(padded, codec.rotation));
}

Matrix opq_decode(const OpqCodec& codec, const CodeBlock& codes) {
    const Matrix rotated = decode_padded(codec.pq, codes);
    return truncate_columns(linalg::matmul_nt(rotated, codec.rotation), codec.input_dim);
}

// ---------------------------------------------------------------------------

ScalarQuantizer scalar_quantize_fit(const Matrix& x) {
    if (x.rows() == 0 || x.cols() == 0) throw DegenerateInput("scalar_quantize_fit: empty input");
    ScalarQuantizer q;
    q.min.assign(x.cols(), std::numeric_limits<double>::infinity());
    std::vector<double> max(x.cols(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto r = x.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            q.min[j] = std::min(q.min[j], r[j]);
            max[j] = std::max(max[j], r[j]);
        }
    }
    q.scale.resize(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        q.min[j] = static_cast<double>(static_cast<float>(q.min[j]));
        const double s = static_cast<double>(static_cast<float>((max[j] - q.min[j]) / 255.0));
        q.scale[j] = s > 0.0 ? s : 1.0;
    }
    return q;
}

CodeBlock scalar_encode(const ScalarQuantizer& q, const Matrix& x) {
    require_cols(x, q.dim(), "scalar_encode");
    CodeBlock out{x.rows(), q.dim(), std::vector<std::uint8_t>(x.rows() * q.dim())};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto r = x.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            // nearbyint honours the default FE_TONEAREST mode: ties go to even.
            const double c = std::nearbyint((r[j] - q.min[j]) / q.scale[j]);
            out.codes[i * q.dim() + j] = static_cast<std::uint8_t>(std::clamp(c, 0.0, 255.0));
        }
    }
    return out;
}

Matrix scalar_decode(const ScalarQuantizer& q, const CodeBlock& codes) {
    require_codes(codes, q.dim(), "scalar_decode");
    Matrix out(codes.n, q.dim());
    for (std::size_t i = 0; i < codes.n; ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < q.dim(); ++j)
            r[j] = q.min[j] + static_cast<double>(codes.codes[i * q.dim() + j]) * q.scale[j];
    }
    return out;
}

// ---------------------------------------------------------------------------

PcaCodec pca_codec_fit(const Matrix& x, std::size_t dims) {
    PcaCodec codec;
    codec.pca = linalg::pca_fit(x, dims);
    for (double& v : codec.pca.mean) v = static_cast<double>(static_cast<float>(v));
    for (double& v : codec.pca.explained_variance) v = static_cast<double>(static_cast<float>(v));
    linalg::round_to_f32(codec.pca.components);
    codec.quantizer = scalar_quantize_fit(codec.pca.project(x));
    return codec;
}

CodeBlock pca_encode(const PcaCodec& codec, const Matrix& x) {
    require_cols(x, codec.pca.input_dim(), "pca_encode");
    return scalar_encode(codec.quantizer, codec.pca.project(x));
}

Matrix pca_decode(const PcaCodec& codec, const CodeBlock& codes) {
    return codec.pca.reconstruct(scalar_decode(codec.quantizer, codes));
}

// ---------------------------------------------------------------------------

namespace {
template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;
}  // namespace

CodecKind kind_of(const AnyCodec& codec) {
    return std::visit(Overloaded{
                          [](const PqCodebook&) { return CodecKind::kPq; },
                          [](const OpqCodec&) { return CodecKind::kOpq; },
                          [](const ScalarQuantizer&) { return CodecKind::kScalar; },
                          [](const PcaCodec&) { return CodecKind::kPca; },
                      },
                      codec);
}

std::size_t input_dim(const AnyCodec& codec) {
    return std::visit(Overloaded{
                          [](const PqCodebook& c) { return c.input_dim; },
                          [](const OpqCodec& c) { return c.input_dim; },
                          [](const ScalarQuantizer& c) { return c.dim(); },
                          [](const PcaCodec& c) { return c.pca.input_dim(); },
                      },
                      codec);
}

std::size_t bytes_per_vector(const AnyCodec& codec) {
    return std::visit(Overloaded{
                          [](const PqCodebook& c) { return c.m; },
                          [](const OpqCodec& c) { return c.pq.m; },
                          [](const ScalarQuantizer& c) { return c.dim(); },
                          [](const PcaCodec& c) { return c.pca.output_dim(); },
                      },
                      codec);
}

CodeBlock encode(const AnyCodec& codec, const Matrix& x) {
    return std::visit(Overloaded{
                          [&](const PqCodebook& c) { return pq_encode(c, x); },
                          [&](const OpqCodec& c) { return opq_encode(c, x); },
                          [&](const ScalarQuantizer& c) { return scalar_encode(c, x); },
                          [&](const PcaCodec& c) { return pca_encode(c, x); },
                      },
                      codec);
}

Matrix decode(const AnyCodec& codec, const CodeBlock& codes) {
    return std::visit(Overloaded{
                          [&](const PqCodebook& c) { return pq_decode(c, codes); },
                          [&](const OpqCodec& c) { return opq_decode(c, codes); },
                          [&](const ScalarQuantizer& c) { return scalar_decode(c, codes); },
                          [&](const PcaCodec& c) { return pca_decode(c, codes); },
                      },
                      codec);
}

// ---------------------------------------------------------------------------

CompressionReport compression_report(const Matrix& x, const Matrix& x_hat) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
        throw ShapeMismatch("compression_report: shapes differ");
    if (x.rows() == 0) throw DegenerateInput("compression_report: empty input");

    std::vector<double> errors(x.rows());
    std::vector<double> relative;
    relative.reserve(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        errors[i] = std::sqrt(linalg::squared_distance(x.row(i), x_hat.row(i)));
        const double n = linalg::norm(x.row(i));
        if (n > 0.0) relative.push_back(errors[i] / n);
    }
    if (relative.empty()) relative.push_back(0.0);

    CompressionReport report;
    report.n = x.rows();
    const auto p = linalg::percentiles(errors, kReportPercentiles);
    const auto pr = linalg::percentiles(relative, kReportPercentiles);
    std::copy(p.begin(), p.end(), report.l2.begin());
    std::copy(pr.begin(), pr.end(), report.relative_l2.begin());
    for (double e : errors) report.mean_l2 += e;
    report.mean_l2 /= static_cast<double>(errors.size());
    for (double e : relative) report.mean_relative_l2 += e;
    report.mean_relative_l2 /= static_cast<double>(relative.size());
    return report;
}

std::array<double, 6> relative_reduction(const CompressionReport& baseline,
                                         const CompressionReport& candidate) {
    std::array<double, 6> out{};
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = baseline.l2[i] > 0.0
                     ? 100.0 * (baseline.l2[i] - candidate.l2[i]) / baseline.l2[i]
                     : 0.0;
    }
    return out;
}

}  // namespace listalign::codec
