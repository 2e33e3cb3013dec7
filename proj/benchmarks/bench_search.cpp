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

#include <algorithm>
#include <numeric>
#include <random>

#include "listalign/eval.hpp"

namespace {

using namespace listalign;
using linalg::Matrix;

Matrix random_unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (double& v : m.values()) v = normal(rng);
    return linalg::normalize_rows(m);
}

// Exact cosine top-k for one query, the same scan the search command runs.
void BM_BruteForceTopK(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix gallery = random_unit_rows(n, 64, 1);
    const Matrix query = random_unit_rows(1, 64, 2);
    std::vector<std::size_t> idx(n);
    std::vector<double> score(n);
    for (auto _ : state) {
        for (std::size_t i = 0; i < n; ++i) score[i] = linalg::dot(query.row(0), gallery.row(i));
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::partial_sort(idx.begin(), idx.begin() + 10, idx.end(), [&](std::size_t a, std::size_t b) {
            return score[a] != score[b] ? score[a] > score[b] : a < b;
        });
        benchmark::DoNotOptimize(idx.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_BruteForceTopK)->Arg(1024)->Arg(16384)->Arg(131072);

void BM_RetrievalMetrics(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix text = random_unit_rows(n, 64, 3);
    const Matrix photo = random_unit_rows(n, 64, 4);
    const std::vector<std::size_t> ks{1, 5, 10};
    for (auto _ : state) benchmark::DoNotOptimize(eval::retrieval_metrics(text, photo, ks));
}
BENCHMARK(BM_RetrievalMetrics)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

}  // namespace
