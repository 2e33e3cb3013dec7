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
#include "listalign/eval.hpp"
#include "oracles.hpp"

namespace listalign::eval {
namespace {

using testing::gaussian;

// Query i = e_i; gallery j leans toward e_(j-1), so every true match is 2nd.
void rank_two_pair(std::size_t n, Matrix& query, Matrix& gallery) {
    query = Matrix::identity(n);
    gallery = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        gallery(j, j) = 0.8;
        gallery(j, (j + n - 1) % n) = 0.9;
    }
    gallery = linalg::normalize_rows(gallery);
}

const std::vector<std::size_t> kKs{1, 5, 10};

TEST(Retrieval, IdenticalOrthonormalRows) {
    const Matrix x = Matrix::identity(6);
    const auto m = retrieval_metrics(x, x, kKs);
    EXPECT_EQ(m.mean_rank_t2i, 1.0);
    EXPECT_EQ(m.mean_rank_i2t, 1.0);
    EXPECT_EQ(m.recall_t2i.at(1), 1.0);
    EXPECT_EQ(m.n_queries, 6u);
}

TEST(Retrieval, ConstructedRankTwo) {
    Matrix q, g;
    rank_two_pair(8, q, g);
    const auto m = retrieval_metrics(q, g, kKs);
    EXPECT_EQ(m.recall_t2i.at(1), 0.0);
    EXPECT_EQ(m.recall_t2i.at(5), 1.0);
    EXPECT_EQ(m.mean_rank_t2i, 2.0);
    EXPECT_EQ(m.mean_rank_i2t, 2.0);
    EXPECT_EQ(m.recall_i2t.at(1), 0.0);
}

TEST(Retrieval, TiesArePessimistic) {
    const Matrix q = Matrix::from_rows({{1, 0}, {1, 0}});
    const auto r = paired_ranks(q, q);
    EXPECT_EQ(r, (std::vector<std::size_t>{2, 2}));
}

TEST(Retrieval, DistinctRowsAlwaysRankFirst) {
    const Matrix x = linalg::normalize_rows(gaussian(40, 5, 1));
    EXPECT_EQ(retrieval_metrics(x, x, kKs).mean_rank_t2i, 1.0);
}

TEST(Retrieval, RecallMonotoneAndRankBounds) {
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const auto m = retrieval_metrics(gaussian(30, 4, s), gaussian(30, 4, s + 100), std::vector<std::size_t>{1, 2, 5, 10, 30});
        double prev = 0.0;
        for (const auto& [k, v] : m.recall_t2i) {
            EXPECT_GE(v, prev);
            EXPECT_LE(v, 1.0);
            prev = v;
        }
        EXPECT_EQ(m.recall_t2i.at(30), 1.0);
        EXPECT_GE(m.mean_rank_t2i, 1.0);
        EXPECT_LE(m.mean_rank_t2i, 30.0);
    }
}

TEST(Retrieval, RandomPairingIsAtChance) {
    const std::size_t n = 512;
    double hits = 0.0;
    const std::vector<std::size_t> one{1};
    for (std::uint64_t s = 1; s <= 5; ++s) {
        const auto m = retrieval_metrics(linalg::normalize_rows(gaussian(n, 16, s)),
                                         linalg::normalize_rows(gaussian(n, 16, s + 50)), one);
        hits += m.recall_t2i.at(1);
    }
    const double mean = hits / 5.0;
    const double p = 1.0 / n;
    const double se = std::sqrt(p * (1 - p) / (5.0 * n));
    EXPECT_LE(std::abs(mean - p), 3.0 * se);
}

TEST(Retrieval, Errors) {
    EXPECT_THROW(retrieval_metrics(Matrix(3, 2), Matrix(4, 2), kKs), ShapeMismatch);
    EXPECT_THROW(retrieval_metrics(Matrix(3, 2), Matrix(3, 2), std::vector<std::size_t>{0}), DegenerateInput);
    EXPECT_THROW(paired_ranks(Matrix(0, 2), Matrix(0, 2)), DegenerateInput);
}

// ---------------------------------------------------------------------------

TEST(Ndcg, HandExamples) {
    const std::vector<std::size_t> r1{7, 3};
    EXPECT_NEAR(ndcg_binary(r1, {7}, 2), 1.0, 1e-9);
    EXPECT_NEAR(ndcg_binary(r1, {3}, 2), 1.0 / std::log2(3.0), 1e-9);
    EXPECT_NEAR(ndcg_binary(r1, {3}, 2), 0.6309, 1e-4);
    const std::vector<std::size_t> r3{1, 2, 3};
    EXPECT_NEAR(ndcg_binary(r3, {1, 3}, 3), 1.5 / (1.0 + 1.0 / std::log2(3.0)), 1e-9);
    EXPECT_NEAR(ndcg_binary(r3, {1, 3}, 3), 0.9197, 1e-4);
}

TEST(Ndcg, BoundsAndEdges) {
    const std::vector<std::size_t> r{4, 5, 6, 7};
    EXPECT_EQ(ndcg_binary(r, {}, 4), 0.0);
    EXPECT_EQ(ndcg_binary(r, {9}, 4), 0.0);
    EXPECT_NEAR(ndcg_binary(r, {4, 5}, 4), 1.0, 1e-12);
    EXPECT_LT(ndcg_binary(r, {5, 6}, 4), 1.0);
    EXPECT_EQ(ndcg_binary(r, {7}, 2), 0.0);
    EXPECT_THROW(ndcg_binary(std::vector<std::size_t>{}, {1}, 2), DegenerateInput);
    EXPECT_THROW(ndcg_binary(r, {4}, 0), DegenerateInput);
}

// ---------------------------------------------------------------------------

TEST(Knn, SeparatedClusters) {
    Matrix train(20, 2), test(10, 2);
    std::vector<int> yl(20), tl(10);
    for (std::size_t i = 0; i < 20; ++i) {
        const int c = static_cast<int>(i % 2);
        train(i, 0) = c ? 1.0 : -1.0;
        train(i, 1) = 0.01 * static_cast<double>(i);
        yl[i] = c;
    }
    for (std::size_t i = 0; i < 10; ++i) {
        const int c = static_cast<int>(i % 2);
        test(i, 0) = c ? 1.0 : -1.0;
        test(i, 1) = -0.02 * static_cast<double>(i);
        tl[i] = c;
    }
    EXPECT_EQ(knn_probe(train, yl, test, tl, 1), 1.0);
    EXPECT_EQ(knn_probe(train, yl, test, tl, 5), 1.0);
}

TEST(Knn, VoteTieGoesToSmallerLabel) {
    const Matrix train = Matrix::from_rows({{1, 0.1}, {1, -0.1}});
    const std::vector<int> yl{3, 1};
    const Matrix test = Matrix::from_rows({{1, 0}});
    EXPECT_EQ(knn_probe(train, yl, test, std::vector<int>{1}, 2), 1.0);
    EXPECT_EQ(knn_probe(train, yl, test, std::vector<int>{3}, 2), 0.0);
}

TEST(Knn, ShuffledLabelsAreAtChance) {
    const Matrix train = gaussian(900, 4, 5), test = gaussian(900, 4, 6);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<int> yl(900), tl(900);
    for (int& y : yl) y = pick(rng);
    for (int& y : tl) y = pick(rng);
    const double acc = knn_probe(train, yl, test, tl, 10);
    EXPECT_LE(std::abs(acc - 1.0 / 3.0), 3.0 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 900.0));
}

TEST(Knn, Errors) {
    const Matrix x = gaussian(3, 2, 1);
    const std::vector<int> y{0, 1, 0};
    EXPECT_THROW(knn_probe(x, y, x, y, 4), DegenerateInput);
    EXPECT_THROW(knn_probe(x, y, x, y, 0), DegenerateInput);
    EXPECT_THROW(knn_probe(x, std::vector<int>{0}, x, y, 1), ShapeMismatch);
}

TEST(Probe, LatentEmbeddingsBeatNoise) {
    const auto train = testing::tiny_records(300, 2, 4, 8);
    const auto test = testing::tiny_records(300, 2, 4, 9);
    auto latents = [](const std::vector<synth::ListingRecord>& rs) {
        Matrix m(rs.size(), rs[0].latent.size());
        for (std::size_t i = 0; i < rs.size(); ++i) std::copy(rs[i].latent.begin(), rs[i].latent.end(), m.row(i).begin());
        return m;
    };
    const auto good = probe_attributes(latents(train), train, latents(test), test);
    const auto bad = probe_attributes(gaussian(300, 4, 10), train, gaussian(300, 4, 11), test);
    ASSERT_EQ(good.size(), synth::attribute_specs().size());
    for (const auto& [name, acc] : good) {
        EXPECT_GT(acc, bad.at(name)) << name;
        EXPECT_LE(acc, 1.0);
    }
}

// ---------------------------------------------------------------------------

TEST(Sweep, FullDimensionMatchesUnprojected) {
    const Matrix trp = linalg::normalize_rows(gaussian(60, 6, 12));
    const Matrix trt = linalg::normalize_rows(linalg::add(trp, gaussian(60, 6, 13, 0.3)));
    const Matrix tep = linalg::normalize_rows(gaussian(40, 6, 14));
    const Matrix tet = linalg::normalize_rows(linalg::add(tep, gaussian(40, 6, 15, 0.3)));
    const SweepInput in{&trp, &trt, &tep, &tet};
    const std::vector<std::size_t> dims{2, 6};
    const auto rows = pca_dim_sweep(in, dims, false, kKs);
    ASSERT_EQ(rows.size(), 2u);
    const auto direct = retrieval_metrics(tet, tep, kKs);
    EXPECT_NEAR(rows[1].metrics.mean_rank_t2i, direct.mean_rank_t2i, 1e-9);
    EXPECT_NEAR(rows[1].metrics.mean_rank_i2t, direct.mean_rank_i2t, 1e-9);
    for (std::size_t k : kKs) EXPECT_NEAR(rows[1].metrics.recall_t2i.at(k), direct.recall_t2i.at(k), 1e-9);
    EXPECT_FALSE(rows[0].quantized);

    const auto q = pca_dim_sweep(in, dims, true, kKs);
    EXPECT_TRUE(q[0].quantized);
    EXPECT_NEAR(q[1].metrics.recall_t2i.at(10), direct.recall_t2i.at(10), 0.05);

    const std::string csv = sweep_csv(rows);
    EXPECT_NE(csv.find('\n'), std::string::npos);
    EXPECT_NE(to_json(EvalReport{direct, {}, rows}).find("mean_rank_t2i"), std::string::npos);
}

TEST(Sweep, RejectsOversizedDims) {
    const Matrix a = gaussian(10, 3, 16);
    const SweepInput in{&a, &a, &a, &a};
    EXPECT_THROW(pca_dim_sweep(in, std::vector<std::size_t>{4}, false, kKs), DegenerateInput);
    EXPECT_THROW(pca_dim_sweep(SweepInput{}, std::vector<std::size_t>{1}, false, kKs), DegenerateInput);
}

}  // namespace
}  // namespace listalign::eval
