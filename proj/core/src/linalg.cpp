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

#include "listalign/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "listalign/error.hpp"

namespace listalign::linalg {

namespace {

using EigenRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EigenRowMatrix> as_eigen(const Matrix& m) {
    return {m.values().data(), static_cast<Eigen::Index>(m.rows()),
            static_cast<Eigen::Index>(m.cols())};
}

Matrix from_eigen(const EigenRowMatrix& m) {
    Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    std::copy(m.data(), m.data() + m.size(), out.values().begin());
    return out;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeMismatch("Matrix: data length " + std::to_string(data_.size()) +
                            " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeMismatch("Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::row_vector(std::span<const double> values) {
    return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw ShapeMismatch("matmul: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        const double* ar = a.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double s = ar[k];
            if (s == 0.0) continue;
            const double* br = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeMismatch("matmul_nt: column counts differ");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(ar, b.row(j));
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeMismatch("matmul_tn: row counts differ");
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* ar = a.row(r).data();
        const double* br = b.row(r).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double s = ar[i];
            if (s == 0.0) continue;
            double* o = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += s * br[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
    return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "subtract");
    Matrix out = a;
    auto o = out.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (double& v : out.values()) v *= s;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("squared_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double frobenius_norm(const Matrix& a) { return norm(a.values()); }

double squared_frobenius_distance(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "squared_frobenius_distance");
    return squared_distance(a.values(), b.values());
}

std::vector<double> column_mean(const Matrix& a) {
    std::vector<double> mean(a.cols(), 0.0);
    if (a.rows() == 0) return mean;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) mean[j] += r[j];
    }
    for (double& m : mean) m /= static_cast<double>(a.rows());
    return mean;
}

Matrix column_slice(const Matrix& a, std::size_t begin, std::size_t count) {
    if (begin + count > a.cols()) throw ShapeMismatch("column_slice: out of range");
    Matrix out(a.rows(), count);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto src = a.row(i).subspan(begin, count);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= a.rows()) throw ShapeMismatch("gather_rows: index out of range");
        const auto src = a.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix pad_columns(const Matrix& a, std::size_t cols) {
    if (cols < a.cols()) throw ShapeMismatch("pad_columns: target narrower than input");
    if (cols == a.cols()) return a;
    Matrix out(a.rows(), cols);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto src = a.row(i);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix normalize_rows(const Matrix& a) {
    Matrix out = a;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        const double n = norm(r);
        if (n > 0.0)
            for (double& v : r) v /= n;
    }
    return out;
}

void round_to_f32(Matrix& a) {
    for (double& v : a.values()) v = static_cast<double>(static_cast<float>(v));
}

bool all_finite(const Matrix& a) {
    return std::all_of(a.values().begin(), a.values().end(),
                       [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

Matrix PcaModel::project(const Matrix& x) const {
    if (x.cols() != input_dim()) throw ShapeMismatch("PcaModel::project: dimension mismatch");
    Matrix centered = x;
    for (std::size_t i = 0; i < centered.rows(); ++i) {
        auto r = centered.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] -= mean[j];
    }
    return matmul_nt(centered, components);
}

Matrix PcaModel::reconstruct(const Matrix& z) const {
    if (z.cols() != output_dim()) throw ShapeMismatch("PcaModel::reconstruct: dimension mismatch");
    Matrix out = matmul(z, components);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += mean[j];
    }
    return out;
}

PcaModel pca_fit(const Matrix& x, std::size_t k) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (n < 2) throw DegenerateInput("pca_fit: need at least two rows");
    if (k < 1 || k > std::min(n, d)) {
        throw DegenerateInput("pca_fit: k=" + std::to_string(k) + " outside [1, min(n, d)]");
    }

    PcaModel model;
    model.mean = column_mean(x);
    EigenRowMatrix centered = as_eigen(x);
    for (Eigen::Index j = 0; j < centered.cols(); ++j) centered.col(j).array() -= model.mean[j];

    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV();

    model.components = Matrix(k, d);
    model.explained_variance.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::abs(v(j, ci)) > std::abs(v(arg, ci))) arg = j;
        const double sign = v(arg, ci) < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < d; ++j) model.components(c, j) = sign * v(j, ci);
        model.explained_variance[c] = sv(ci) * sv(ci) / static_cast<double>(n - 1);
    }
    return model;
}

// ---------------------------------------------------------------------------

std::size_t nearest_centroid(const Matrix& centroids, std::span<const double> x,
                             double* squared_dist) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = squared_distance(centroids.row(c), x);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (squared_dist != nullptr) *squared_dist = best_d;
    return best;
}

namespace {

double assign_all(const Matrix& x, const Matrix& centroids, std::vector<std::size_t>& labels,
                  std::vector<double>& dist) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        labels[i] = nearest_centroid(centroids, x.row(i), &dist[i]);
        inertia += dist[i];
    }
    return inertia;
}

KmeansModel lloyd(const Matrix& x, Matrix centroids, std::size_t iters) {
    const std::size_t n = x.rows();
    const std::size_t k = centroids.rows();
    const std::size_t d = x.cols();
    std::vector<std::size_t> labels(n);
    std::vector<std::size_t> previous;
    std::vector<double> dist(n);
    KmeansModel model;

    for (std::size_t it = 0; it < iters; ++it) {
        model.inertia_history.push_back(assign_all(x, centroids, labels, dist));
        if (labels == previous) break;
        previous = labels;

        std::vector<std::size_t> counts(k, 0);
        for (std::size_t l : labels) ++counts[l];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[labels[i]] < 2) continue;
                if (far == n || dist[i] > dist[far]) far = i;
            }
            if (far == n) break;  // fewer distinct points than clusters
            --counts[labels[far]];
            labels[far] = c;
            counts[c] = 1;
            dist[far] = 0.0;
        }

        Matrix sums(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            auto s = sums.row(labels[i]);
            const auto r = x.row(i);
            for (std::size_t j = 0; j < d; ++j) s[j] += r[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            auto dst = centroids.row(c);
            const auto s = sums.row(c);
            for (std::size_t j = 0; j < d; ++j) dst[j] = s[j] / static_cast<double>(counts[c]);
        }
    }
    model.inertia = assign_all(x, centroids, labels, dist);
    model.inertia_history.push_back(model.inertia);
    model.centroids = std::move(centroids);
    return model;
}

}  // namespace

KmeansModel kmeans_fit(const Matrix& x, std::size_t k, std::size_t iters, std::uint64_t seed) {
    const std::size_t n = x.rows();
    if (k < 1) throw DegenerateInput("kmeans_fit: K must be at least 1");
    if (k > n) {
        throw DegenerateInput("kmeans_fit: K=" + std::to_string(k) + " exceeds n=" +
                              std::to_string(n));
    }

    std::mt19937_64 rng(seed);
    Matrix centroids(k, x.cols());
    std::vector<bool> chosen(n, false);
    std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    chosen[first] = true;
    std::copy(x.row(first).begin(), x.row(first).end(), centroids.row(0).begin());

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), x.row(first));

    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                cum += d2[i];
                pick = i;
                if (cum > r) break;
            }
        } else {
            // Every point coincides with a centroid already.
            for (std::size_t i = 0; i < n && pick == n; ++i)
                if (!chosen[i]) pick = i;
        }
        chosen[pick] = true;
        std::copy(x.row(pick).begin(), x.row(pick).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(x.row(i), x.row(pick)));
    }
    return lloyd(x, std::move(centroids), iters);
}

KmeansModel kmeans_refine(const Matrix& x, Matrix initial, std::size_t iters) {
    if (initial.cols() != x.cols()) throw ShapeMismatch("kmeans_refine: dimension mismatch");
    if (initial.rows() < 1) throw DegenerateInput("kmeans_refine: no centroids");
    return lloyd(x, std::move(initial), iters);
}

// ---------------------------------------------------------------------------

Matrix procrustes(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DegenerateInput("procrustes: A and B must have the same shape");
    }
    if (a.cols() == 0) throw DegenerateInput("procrustes: empty input");
    const EigenRowMatrix m = as_eigen(a).transpose() * as_eigen(b);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const EigenRowMatrix r = svd.matrixU() * svd.matrixV().transpose();
    return from_eigen(r);
}

Matrix random_orthogonal(std::size_t d, std::uint64_t seed) {
    if (d == 0) throw DegenerateInput("random_orthogonal: dimension must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    // Sign fix so the result is Haar-distributed and independent of QR conventions.
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < q.cols(); ++c)
        if (r(c, c) < 0) q.col(c) *= -1.0;
    return from_eigen(q);
}

std::vector<double> percentiles(std::span<const double> values, std::span<const double> ps) {
    if (values.empty()) throw DegenerateInput("percentiles: empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double last = static_cast<double>(sorted.size() - 1);
    std::vector<double> out;
    out.reserve(ps.size());
    for (double p : ps) {
        if (!(p >= 0.0 && p <= 1.0)) throw DegenerateInput("percentiles: p outside [0, 1]");
        const double pos = p * last;
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = static_cast<std::size_t>(std::ceil(pos));
        const double frac = pos - static_cast<double>(lo);
        out.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
    }
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace listalign::linalg
