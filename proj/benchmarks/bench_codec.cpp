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

#include <benchmark/benchmark.h>

#include <random>

#include "listalign/codec.hpp"

namespace {

using namespace listalign;
using linalg::Matrix;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (double& v : m.values()) v = normal(rng);
    return m;
}

void BM_PqEncode(benchmark::State& state) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    const Matrix train = random_matrix(2048, dim, 1);
    const Matrix x = random_matrix(1024, dim, 2);
    const auto cb = codec::pq_train(train, {dim / 4, 256, 5, 3});
    for (auto _ : state) benchmark::DoNotOptimize(codec::pq_encode(cb, x));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows()));
}
BENCHMARK(BM_PqEncode)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_OpqEncode(benchmark::State& state) {
    const Matrix train = random_matrix(2048, 128, 4);
    const Matrix x = random_matrix(1024, 128, 5);
    codec::OpqParams p;
    p.m = 32;
    p.k = 256;
    p.rotated_dim = 160;
    p.outer_iters = 2;
    p.init_iters = 5;
    p.seed = 6;
    const auto c = codec::opq_train(train, p);
    for (auto _ : state) benchmark::DoNotOptimize(codec::opq_encode(c, x));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows()));
}
BENCHMARK(BM_OpqEncode)->Unit(benchmark::kMillisecond);

void BM_PcaEncode(benchmark::State& state) {
    const Matrix x = random_matrix(4096, 64, 7);
    const auto c = codec::pca_codec_fit(x, 40);
    for (auto _ : state) benchmark::DoNotOptimize(codec::pca_encode(c, x));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.rows()));
}
BENCHMARK(BM_PcaEncode)->Unit(benchmark::kMillisecond);

void BM_PqTrain(benchmark::State& state) {
    const Matrix x = random_matrix(4096, 32, 8);
    for (auto _ : state) benchmark::DoNotOptimize(codec::pq_train(x, {4, 16, 25, 9}));
}
BENCHMARK(BM_PqTrain)->Unit(benchmark::kMillisecond);

}  // namespace
