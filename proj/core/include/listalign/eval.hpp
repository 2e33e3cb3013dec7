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
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "listalign/linalg.hpp"
#include "listalign/synth.hpp"

namespace listalign::eval {

using linalg::Matrix;

/// Both directions of paired retrieval. Row i of the text matrix pairs with
/// row i of the photo matrix.
struct RetrievalMetrics {
    double mean_rank_t2i = 0.0;
    double mean_rank_i2t = 0.0;
    std::map<std::size_t, double> recall_t2i;
    std::map<std::size_t, double> recall_i2t;
    std::size_t n_queries = 0;

    bool operator==(const RetrievalMetrics&) const = default;
};

/// 1-based rank of gallery row i for query row i under cosine similarity.
/// Ties count against the query: rank = 1 + #{j != i : sim(i, j) >= sim(i, i)}.
std::vector<std::size_t> paired_ranks(const Matrix& query, const Matrix& gallery);

/// text→image treats text rows as queries over photo rows; image→text swaps.
RetrievalMetrics retrieval_metrics(const Matrix& text, const Matrix& photo,
                                   std::span<const std::size_t> ks);

/// Majority vote over the k nearest cosine neighbours in the training set.
/// Neighbours are ordered by (similarity desc, index asc); vote ties go to the
/// smaller label.
double knn_probe(const Matrix& train, std::span<const int> train_labels, const Matrix& test,
                 std::span<const int> test_labels, std::size_t k = 10);

using ProbeReport = std::map<std::string, double>;

/// One probe per synthetic attribute.
ProbeReport probe_attributes(const Matrix& train, std::span<const synth::ListingRecord> train_records,
                             const Matrix& test, std::span<const synth::ListingRecord> test_records,
                             std::size_t k = 10);

/// Binary-relevance NDCG over the first `depth` positions. Returns 0 when no
/// item is relevant.
double ndcg_binary(std::span<const std::size_t> ranking, const std::set<std::size_t>& relevant,
                   std::size_t depth);

struct SweepRow {
    std::size_t dim = 0;
    bool quantized = false;
    RetrievalMetrics metrics;

    bool operator==(const SweepRow&) const = default;
};

struct SweepInput {
    const Matrix* train_photo = nullptr;
    const Matrix* train_text = nullptr;
    const Matrix* test_photo = nullptr;
    const Matrix* test_text = nullptr;
};

/// PCA is fit on the stacked training embeddings of both towers. Embeddings
/// are projected onto the leading components without centering, so the full
/// dimension is a pure rotation. With `quantize_8bit`, projections pass through
/// a scalar quantizer fit on the training projections.
std::vector<SweepRow> pca_dim_sweep(const SweepInput& input, std::span<const std::size_t> dims,
                                    bool quantize_8bit, std::span<const std::size_t> ks);

struct EvalReport {
    RetrievalMetrics holdout;
    ProbeReport probes;
    std::vector<SweepRow> sweep;
};

std::string to_json(const RetrievalMetrics& m);
std::string to_json(const EvalReport& report);
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace listalign::eval
