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

#include "listalign/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "listalign/codec.hpp"
#include "listalign/error.hpp"

namespace listalign::eval {

namespace {

using json = nlohmann::json;

Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeMismatch("vstack: column counts differ");
    Matrix out(a.rows() + b.rows(), a.cols());
    std::copy(a.values().begin(), a.values().end(), out.values().begin());
    std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
    return out;
}

double mean_of(const std::vector<std::size_t>& v) {
    double s = 0.0;
    for (std::size_t x : v) s += static_cast<double>(x);
    return s / static_cast<double>(v.size());
}

std::map<std::size_t, double> recall_table(const std::vector<std::size_t>& ranks,
                                           std::span<const std::size_t> ks) {
    std::map<std::size_t, double> out;
    for (std::size_t k : ks) {
        if (k == 0) throw DegenerateInput("recall@0 is undefined");
        const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
        out[k] = static_cast<double>(hits) / static_cast<double>(ranks.size());
    }
    return out;
}

json metrics_json(const RetrievalMetrics& m) {
    json r_t2i = json::object();
    json r_i2t = json::object();
    for (const auto& [k, v] : m.recall_t2i) r_t2i[std::to_string(k)] = v;
    for (const auto& [k, v] : m.recall_i2t) r_i2t[std::to_string(k)] = v;
    return {{"n_queries", m.n_queries},
            {"mean_rank_t2i", m.mean_rank_t2i},
            {"mean_rank_i2t", m.mean_rank_i2t},
            {"recall_t2i", r_t2i},
            {"recall_i2t", r_i2t}};
}

}  // namespace

std::vector<std::size_t> paired_ranks(const Matrix& query, const Matrix& gallery) {
    if (query.rows() != gallery.rows() || query.cols() != gallery.cols())
        throw ShapeMismatch("paired retrieval needs query and gallery of equal shape");
    if (query.rows() == 0) throw DegenerateInput("paired retrieval needs at least one pair");
    const Matrix sim = linalg::matmul_nt(linalg::normalize_rows(query), linalg::normalize_rows(gallery));
    std::vector<std::size_t> ranks(sim.rows());
    for (std::size_t i = 0; i < sim.rows(); ++i) {
        const auto row = sim.row(i);
        const double own = row[i];
        std::size_t ahead = 0;
        for (std::size_t j = 0; j < row.size(); ++j)
            if (j != i && row[j] >= own) ++ahead;
        ranks[i] = ahead + 1;
    }
    return ranks;
}

RetrievalMetrics retrieval_metrics(const Matrix& text, const Matrix& photo,
                                   std::span<const std::size_t> ks) {
    const auto t2i = paired_ranks(text, photo);
    const auto i2t = paired_ranks(photo, text);
    RetrievalMetrics m;
    m.n_queries = t2i.size();
    m.mean_rank_t2i = mean_of(t2i);
    m.mean_rank_i2t = mean_of(i2t);
    m.recall_t2i = recall_table(t2i, ks);
    m.recall_i2t = recall_table(i2t, ks);
    return m;
}

double knn_probe(const Matrix& train, std::span<const int> train_labels, const Matrix& test,
                 std::span<const int> test_labels, std::size_t k) {
    if (k == 0) throw DegenerateInput("knn_probe: k must be >= 1");
    if (train.rows() < k) throw DegenerateInput("knn_probe: training set smaller than k");
    if (train.rows() != train_labels.size() || test.rows() != test_labels.size())
        throw ShapeMismatch("knn_probe: label count does not match embeddings");
    if (train.cols() != test.cols()) throw ShapeMismatch("knn_probe: embedding widths differ");
    if (test.rows() == 0) throw DegenerateInput("knn_probe: empty test set");

    const Matrix sim = linalg::matmul_nt(linalg::normalize_rows(test), linalg::normalize_rows(train));
    std::vector<std::size_t> order(train.rows());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const auto row = sim.row(i);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              return row[a] != row[b] ? row[a] > row[b] : a < b;
                          });
        std::map<int, std::size_t> votes;
        for (std::size_t n = 0; n < k; ++n) ++votes[train_labels[order[n]]];
        // std::map iterates labels ascending, so the first strict maximum wins ties.
        int best = votes.begin()->first;
        std::size_t best_count = 0;
        for (const auto& [label, count] : votes)
            if (count > best_count) {
                best = label;
                best_count = count;
            }
        if (best == test_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.rows());
}

ProbeReport probe_attributes(const Matrix& train, std::span<const synth::ListingRecord> train_records,
                             const Matrix& test, std::span<const synth::ListingRecord> test_records,
                             std::size_t k) {
    ProbeReport report;
    for (const auto& spec : synth::attribute_specs()) {
        std::vector<int> a, b;
        for (const auto& r : train_records) a.push_back(r.attributes.at(spec.name));
        for (const auto& r : test_records) b.push_back(r.attributes.at(spec.name));
        report[spec.name] = knn_probe(train, a, test, b, k);
    }
    return report;
}

double ndcg_binary(std::span<const std::size_t> ranking, const std::set<std::size_t>& relevant,
                   std::size_t depth) {
    if (ranking.empty()) throw DegenerateInput("ndcg_binary: empty ranking");
    if (depth == 0) throw DegenerateInput("ndcg_binary: depth must be >= 1");
    if (relevant.empty()) return 0.0;
    double dcg = 0.0;
    for (std::size_t p = 0; p < std::min(depth, ranking.size()); ++p)
        if (relevant.count(ranking[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    double ideal = 0.0;
    for (std::size_t p = 0; p < std::min(depth, relevant.size()); ++p)
        ideal += 1.0 / std::log2(static_cast<double>(p) + 2.0);
    return dcg / ideal;
}

std::vector<SweepRow> pca_dim_sweep(const SweepInput& in, std::span<const std::size_t> dims,
                                    bool quantize_8bit, std::span<const std::size_t> ks) {
    if (!in.train_photo || !in.train_text || !in.test_photo || !in.test_text)
        throw DegenerateInput("pca_dim_sweep: missing embeddings");
    const std::size_t width = in.train_photo->cols();
    std::size_t max_dim = 0;
    for (std::size_t d : dims) {
        if (d == 0 || d > width)
            throw DegenerateInput("pca_dim_sweep: dim " + std::to_string(d) + " outside [1, " +
                                  std::to_string(width) + "]");
        max_dim = std::max(max_dim, d);
    }
    const Matrix train = vstack(*in.train_photo, *in.train_text);
    const auto pca = linalg::pca_fit(train, max_dim);

    std::vector<SweepRow> rows;
    for (std::size_t d : dims) {
        const Matrix basis = linalg::column_slice(linalg::transpose(pca.components), 0, d);
        Matrix photo = linalg::matmul(*in.test_photo, basis);
        Matrix text = linalg::matmul(*in.test_text, basis);
        if (quantize_8bit) {
            const auto q = codec::scalar_quantize_fit(linalg::matmul(train, basis));
            photo = codec::scalar_decode(q, codec::scalar_encode(q, photo));
            text = codec::scalar_decode(q, codec::scalar_encode(q, text));
        }
        rows.push_back({d, quantize_8bit, retrieval_metrics(text, photo, ks)});
    }
    return rows;
}

std::string to_json(const RetrievalMetrics& m) { return metrics_json(m).dump(2); }

std::string to_json(const EvalReport& report) {
    json sweep = json::array();
    for (const auto& row : report.sweep) {
        json r = metrics_json(row.metrics);
        r["dim"] = row.dim;
        r["quantized"] = row.quantized;
        sweep.push_back(std::move(r));
    }
    json probes = json::object();
    for (const auto& [name, acc] : report.probes) probes[name] = acc;
    return json{{"holdout", metrics_json(report.holdout)}, {"probes", probes}, {"sweep", sweep}}
        .dump(2);
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::set<std::size_t> ks;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.metrics.recall_t2i) ks.insert(k);
    std::ostringstream out;
    out.precision(10);
    out << "dim,quantized,mean_rank_t2i,mean_rank_i2t";
    for (std::size_t k : ks) out << ",recall_t2i@" << k << ",recall_i2t@" << k;
    out << '\n';
    for (const auto& r : rows) {
        out << r.dim << ',' << (r.quantized ? 1 : 0) << ',' << r.metrics.mean_rank_t2i << ','
            << r.metrics.mean_rank_i2t;
        for (std::size_t k : ks) {
            auto get = [k](const std::map<std::size_t, double>& m) {
                const auto it = m.find(k);
                return it == m.end() ? 0.0 : it->second;
            };
            out << ',' << get(r.metrics.recall_t2i) << ',' << get(r.metrics.recall_i2t);
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace listalign::eval
