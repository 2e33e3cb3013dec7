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

#include <gtest/gtest.h>

#include <cmath>

#include "listalign/error.hpp"
#include "listalign/linalg.hpp"
#include "oracles.hpp"

namespace listalign::linalg {
namespace {

using testing::gaussian;

Matrix orthogonality_gap(const Matrix& r) { return subtract(matmul_nt(r, r), Matrix::identity(r.rows())); }

TEST(Matrix, KernelsMatchNaiveOracle) {
    const Matrix a = gaussian(5, 7, 1);
    const Matrix b = gaussian(7, 3, 2);
    EXPECT_LT(testing::max_abs_diff(matmul(a, b), testing::naive_matmul(a, b)), 1e-12);
    EXPECT_LT(testing::max_abs_diff(matmul_tn(a, a), testing::naive_matmul(testing::naive_transpose(a), a)), 1e-12);
    EXPECT_LT(testing::max_abs_diff(matmul_nt(a, a), testing::naive_matmul(a, testing::naive_transpose(a))), 1e-12);
    EXPECT_EQ(transpose(a), testing::naive_transpose(a));
}

TEST(Matrix, ShapeViolationsThrow) {
    EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeMismatch);
    EXPECT_THROW(add(Matrix(2, 3), Matrix(3, 2)), ShapeMismatch);
}

TEST(Matrix, RoundToF32IsIdempotent) {
    Matrix a = gaussian(4, 4, 3);
    round_to_f32(a);
    Matrix b = a;
    round_to_f32(b);
    EXPECT_EQ(a, b);
    for (double v : a.values()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

// ---------------------------------------------------------------------------

TEST(Pca, LineCapturesAllVariance) {
    Matrix x(50, 2);
    for (std::size_t i = 0; i < 50; ++i) {
        x(i, 0) = static_cast<double>(i) - 20.0;
        x(i, 1) = 2.0 * x(i, 0);
    }
    const auto full = pca_fit(x, 2);
    EXPECT_NEAR(full.explained_variance[0] / (full.explained_variance[0] + full.explained_variance[1]), 1.0, 1e-12);
}

TEST(Pca, FullRankRoundTripIsLossless) {
    const Matrix x = gaussian(1000, 4, 4);
    const auto p = pca_fit(x, 4);
    const Matrix back = p.reconstruct(p.project(x));
    EXPECT_LT(std::sqrt(squared_frobenius_distance(x, back)), 1e-10);
    EXPECT_LT(std::sqrt(squared_frobenius_distance(x, back)), 1e-8 * frobenius_norm(x));
}

TEST(Pca, AgreesWithJacobiEigenOracle) {
    Matrix x = gaussian(4000, 3, 5);
    const double sd[3] = {3.0, 2.0, 1.0};
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < 3; ++j) x(i, j) *= sd[j];
    const auto p = pca_fit(x, 2);
    const auto oracle = testing::jacobi_eigen(testing::sample_covariance(x));
    EXPECT_NEAR(p.explained_variance[0], oracle.values[0], 1e-9 * oracle.values[0]);
    EXPECT_NEAR(p.explained_variance[1], oracle.values[1], 1e-9 * oracle.values[1]);
    // Sampling tolerance around the population variances (9, 4).
    EXPECT_NEAR(p.explained_variance[0], 9.0, 0.6);
    EXPECT_NEAR(p.explained_variance[1], 4.0, 0.3);
    for (std::size_t c = 0; c < 2; ++c) {
        double d = 0.0;
        for (std::size_t j = 0; j < 3; ++j) d += p.components(c, j) * oracle.vectors(j, c);
        EXPECT_NEAR(std::abs(d), 1.0, 1e-8);
    }
}

TEST(Pca, ComponentsOrthonormalAndVarianceSorted) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix x = gaussian(60, 9, 100 + seed);
        const auto p = pca_fit(x, 6);
        EXPECT_LT(testing::max_abs_diff(matmul_nt(p.components, p.components), Matrix::identity(6)), 1e-8);
        for (std::size_t i = 1; i < 6; ++i) EXPECT_LE(p.explained_variance[i], p.explained_variance[i - 1]);
        for (double v : p.explained_variance) EXPECT_GE(v, 0.0);
    }
}

TEST(Pca, BeatsRandomRankKProjections) {
    const Matrix x = gaussian(40, 5, 7);
    const auto p = pca_fit(x, 2);
    const double best = squared_frobenius_distance(x, p.reconstruct(p.project(x)));
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Matrix q = column_slice(random_orthogonal(5, s), 0, 2);  // 5 × 2 orthonormal columns
        PcaModel alt{p.mean, transpose(q), {0.0, 0.0}};
        EXPECT_LE(best, squared_frobenius_distance(x, alt.reconstruct(alt.project(x))) + 1e-9);
    }
}

TEST(Pca, RejectsDegenerateInput) {
    EXPECT_THROW(pca_fit(Matrix(1, 3), 1), DegenerateInput);
    EXPECT_THROW(pca_fit(gaussian(5, 3, 1), 0), DegenerateInput);
    EXPECT_THROW(pca_fit(gaussian(5, 3, 1), 4), DegenerateInput);
}

// ---------------------------------------------------------------------------

TEST(Kmeans, KEqualsNGivesZeroInertia) {
    const Matrix x = gaussian(12, 3, 8);
    const auto m = kmeans_fit(x, 12, 10, 1);
    EXPECT_EQ(m.inertia, 0.0);
}

TEST(Kmeans, SingleClusterIsTheMean) {
    const Matrix x = gaussian(200, 3, 9);
    const auto m = kmeans_fit(x, 1, 5, 1);
    const auto mean = column_mean(x);
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) total += squared_distance(x.row(i), mean);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m.centroids(0, j), mean[j], 1e-12);
    EXPECT_NEAR(m.inertia, total, 1e-9 * total);
}

TEST(Kmeans, RecoversTwoBlobs) {
    const std::size_t half = 250;
    const double sigma = 0.5;
    Matrix x = gaussian(2 * half, 2, 10, sigma);
    for (std::size_t i = 0; i < half; ++i) x(i, 0) += 10.0;
    const auto m = kmeans_fit(x, 2, 20, 3);
    const double tol = 3.0 * sigma / std::sqrt(static_cast<double>(half)) * std::sqrt(2.0);
    const std::size_t hi = m.centroids(0, 0) > m.centroids(1, 0) ? 0 : 1;
    EXPECT_NEAR(m.centroids(hi, 0), 10.0, tol);
    EXPECT_NEAR(m.centroids(hi, 1), 0.0, tol);
    EXPECT_NEAR(m.centroids(1 - hi, 0), 0.0, tol);
    for (std::size_t i = 0; i < 2 * half; ++i)
        EXPECT_EQ(nearest_centroid(m.centroids, x.row(i)), i < half ? hi : 1 - hi);
}

TEST(Kmeans, InertiaMonotoneAndDeterministic) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix x = gaussian(300, 4, 20 + seed);
        const auto a = kmeans_fit(x, 8, 30, seed);
        const auto b = kmeans_fit(x, 8, 30, seed);
        EXPECT_EQ(a.centroids, b.centroids);
        for (std::size_t i = 1; i < a.inertia_history.size(); ++i)
            EXPECT_LE(a.inertia_history[i], a.inertia_history[i - 1] + 1e-9);
        EXPECT_GE(a.inertia, 0.0);
    }
}

TEST(Kmeans, EmptyClusterReseededAtFarthestPoint) {
    // Three initial centroids, one parked far from every point.
    Matrix x = Matrix::from_rows({{0, 0}, {0.1, 0}, {5, 5}, {5.1, 5}, {9, 0}});
    Matrix init = Matrix::from_rows({{0, 0}, {5, 5}, {100, 100}});
    const auto m = kmeans_refine(x, init, 5);
    EXPECT_LT(m.centroids(2, 0), 50.0);
    EXPECT_LE(m.inertia, 0.0101);
}

TEST(Kmeans, NearestCentroidTiesGoLow) {
    const Matrix c = Matrix::from_rows({{1, 0}, {-1, 0}});
    const std::vector<double> origin{0, 0};
    EXPECT_EQ(nearest_centroid(c, origin), 0u);
}

TEST(Kmeans, RejectsTooManyClusters) { EXPECT_THROW(kmeans_fit(gaussian(3, 2, 1), 4, 5, 0), DegenerateInput); }

// ---------------------------------------------------------------------------

TEST(Procrustes, IdentityWhenInputsMatch) {
    const Matrix a = gaussian(30, 5, 11);
    EXPECT_LT(testing::max_abs_diff(procrustes(a, a), Matrix::identity(5)), 1e-10);
}

TEST(Procrustes, RecoversKnownRotation) {
    const Matrix a = gaussian(40, 6, 12);
    const Matrix r0 = random_orthogonal(6, 99);
    const Matrix b = matmul(a, r0);
    const Matrix r = procrustes(a, b);
    EXPECT_LT(testing::max_abs_diff(matmul(a, r), b), 1e-6);
    EXPECT_LT(testing::max_abs_diff(orthogonality_gap(r), Matrix(6, 6)), 1e-8);
}

TEST(Procrustes, BeatsRandomRotationsOnRankOneInput) {
    Matrix a(10, 4);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 4; ++j) a(i, j) = static_cast<double>(j + 1);
    const Matrix b = gaussian(10, 4, 13);
    const double best = squared_frobenius_distance(matmul(a, procrustes(a, b)), b);
    for (std::uint64_t s = 0; s < 100; ++s)
        EXPECT_LE(best, squared_frobenius_distance(matmul(a, random_orthogonal(4, s)), b) + 1e-9);
}

TEST(Procrustes, OptimalOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix a = gaussian(20, 4, 200 + seed);
        const Matrix b = gaussian(20, 4, 300 + seed);
        const double best = squared_frobenius_distance(matmul(a, procrustes(a, b)), b);
        for (std::uint64_t s = 0; s < 100; ++s)
            EXPECT_LE(best, squared_frobenius_distance(matmul(a, random_orthogonal(4, 1000 + s)), b) + 1e-9);
    }
}

TEST(Procrustes, ShapeMismatchIsDegenerate) {
    EXPECT_THROW(procrustes(Matrix(3, 2), Matrix(3, 3)), DegenerateInput);
}

// ---------------------------------------------------------------------------

TEST(Percentiles, HandExamples) {
    std::vector<double> hundred(100);
    for (std::size_t i = 0; i < 100; ++i) hundred[i] = static_cast<double>(i + 1);
    const std::vector<double> half{0.5};
    EXPECT_DOUBLE_EQ(percentiles(hundred, half)[0], 50.5);
    const std::vector<double> seven{7.0};
    const std::vector<double> ps{0.0, 0.3, 1.0};
    for (double v : percentiles(seven, ps)) EXPECT_EQ(v, 7.0);
    const std::vector<double> pair{0.0, 10.0};
    const std::vector<double> quarter{0.25};
    EXPECT_DOUBLE_EQ(percentiles(pair, quarter)[0], 2.5);
}

TEST(Percentiles, MonotoneInP) {
    const Matrix x = gaussian(1, 57, 14);
    const std::vector<double> ps{0.0, 0.05, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0};
    const auto q = percentiles(x.values(), ps);
    for (std::size_t i = 1; i < q.size(); ++i) EXPECT_LE(q[i - 1], q[i]);
}

TEST(Percentiles, RejectsBadInput) {
    const std::vector<double> none;
    const std::vector<double> half{0.5};
    EXPECT_THROW(percentiles(none, half), DegenerateInput);
    const std::vector<double> one{1.0};
    const std::vector<double> bad{1.5};
    EXPECT_THROW(percentiles(one, bad), DegenerateInput);
}

TEST(Seeds, DeriveSeedSeparatesStreams) {
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
    EXPECT_EQ(derive_seed(5, 7), derive_seed(5, 7));
}

TEST(RandomOrthogonal, IsOrthogonal) {
    const Matrix r = random_orthogonal(16, 3);
    EXPECT_LT(testing::max_abs_diff(orthogonality_gap(r), Matrix(16, 16)), 1e-12);
}

}  // namespace
}  // namespace listalign::linalg
