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
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace listalign::linalg {

/// Dense row-major matrix of doubles. Storage formats use f32; everything in
/// memory is widened to f64.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix row_vector(std::span<const double> values);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Kernels. Shape violations throw ShapeMismatch.

Matrix matmul(const Matrix& a, const Matrix& b);
/// a · bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// aᵀ · b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double frobenius_norm(const Matrix& a);
double squared_frobenius_distance(const Matrix& a, const Matrix& b);

std::vector<double> column_mean(const Matrix& a);
/// Columns [begin, begin + count).
Matrix column_slice(const Matrix& a, std::size_t begin, std::size_t count);
/// Selected rows in the given order.
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> rows);
/// Appends zero columns until `cols` is reached.
Matrix pad_columns(const Matrix& a, std::size_t cols);
/// Rows scaled to unit L2 norm; zero rows stay zero.
Matrix normalize_rows(const Matrix& a);

/// Rounds every entry through f32, the storage precision.
void round_to_f32(Matrix& a);
bool all_finite(const Matrix& a);

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
    std::vector<double> mean;
    Matrix components;                     ///< k × d, orthonormal rows
    std::vector<double> explained_variance;  ///< non-increasing, sample variance

    [[nodiscard]] std::size_t input_dim() const noexcept { return mean.size(); }
    [[nodiscard]] std::size_t output_dim() const noexcept { return components.rows(); }

    /// (x − mean) · componentsᵀ
    [[nodiscard]] Matrix project(const Matrix& x) const;
    /// z · components + mean
    [[nodiscard]] Matrix reconstruct(const Matrix& z) const;
};

/// Top-k principal directions via SVD of the centered data. Component signs
/// are fixed so the largest-magnitude entry of each row is positive.
PcaModel pca_fit(const Matrix& x, std::size_t k);

// ---------------------------------------------------------------------------
// k-means

struct KmeansModel {
    Matrix centroids;
    double inertia = 0.0;
    /// Inertia measured at each Lloyd assignment step.
    std::vector<double> inertia_history;
};

/// k-means++ seeding followed by Lloyd iterations. Empty clusters are
/// re-seeded at the point farthest from its current centroid.
KmeansModel kmeans_fit(const Matrix& x, std::size_t k, std::size_t iters, std::uint64_t seed);

/// Lloyd iterations starting from `initial` (no re-seeding of the start).
KmeansModel kmeans_refine(const Matrix& x, Matrix initial, std::size_t iters);

/// Index of the nearest centroid; ties resolve to the lowest index.
std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> x,
                             double* squared_dist = nullptr);

// ---------------------------------------------------------------------------

/// Orthogonal R minimizing ‖A·R − B‖_F.
Matrix procrustes(const Matrix& a, const Matrix& b);

/// Haar-random d × d orthogonal matrix (QR of a Gaussian matrix).
Matrix random_orthogonal(std::size_t d, std::uint64_t seed);

/// Linear interpolation between order statistics, inclusive endpoints.
std::vector<double> percentiles(std::span<const double> values, std::span<const double> ps);

/// Stateless 64-bit mixer used to derive independent sub-seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace listalign::linalg
