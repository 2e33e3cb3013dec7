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

#include "listalign/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "json.hpp"
#include "listalign/codec_io.hpp"
#include "listalign/error.hpp"
#include "listalign/io.hpp"

namespace listalign::synth {

namespace {

using json = nlohmann::json;
using EigenRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kMapStream = 0;
constexpr std::uint64_t kListingStreamBase = 1'000;

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Matrix pseudo_inverse(const Matrix& a) {
    const Eigen::Map<const EigenRowMatrix> m(a.values().data(), static_cast<Eigen::Index>(a.rows()),
                                             static_cast<Eigen::Index>(a.cols()));
    const EigenRowMatrix p = m.completeOrthogonalDecomposition().pseudoInverse();
    Matrix out(a.cols(), a.rows());
    std::copy(p.data(), p.data() + p.size(), out.values().begin());
    return out;
}

std::vector<double> mat_vec(const Matrix& m, std::span<const double> v) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) out[i] = linalg::dot(m.row(i), v);
    return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = linalg::norm(a);
    const double nb = linalg::norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return linalg::dot(a, b) / (na * nb);
}

}  // namespace

void validate(const GeneratorConfig& cfg) {
    auto fail = [](const std::string& what) { throw DegenerateInput("GeneratorConfig: " + what); };
    if (cfg.n_listings < 1) fail("n_listings must be >= 1");
    if (cfg.latent_dim < 1 || cfg.photo_dim < 1 || cfg.text_dim < 1) fail("dims must be >= 1");
    if (cfg.max_photos < 1) fail("max_photos must be >= 1");
    if (cfg.min_photos < 1 || cfg.min_photos > cfg.max_photos)
        fail("min_photos must be in [1, max_photos]");
    if (!(cfg.photo_noise >= 0.0) || !(cfg.text_noise >= 0.0)) fail("noise must be >= 0");
    if (cfg.aspect_count < 1) fail("aspect_count must be >= 1");
    if (!(cfg.salience_decay >= 0.0)) fail("salience_decay must be >= 0");
    if (cfg.min_text_length > cfg.max_text_length) fail("min_text_length > max_text_length");
}

GeneratingModel make_generating_model(const GeneratorConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(linalg::derive_seed(cfg.seed, kMapStream));
    std::normal_distribution<double> normal(0.0, 1.0);

    GeneratingModel model;
    model.salience_decay = cfg.salience_decay;
    const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
    model.photo_map = Matrix(cfg.photo_dim, cfg.latent_dim);
    for (double& v : model.photo_map.values()) v = f32(normal(rng) * map_scale);
    model.text_map = Matrix(cfg.text_dim, cfg.latent_dim);
    for (double& v : model.text_map.values()) v = f32(normal(rng) * map_scale);
    model.photo_pinv = pseudo_inverse(model.photo_map);
    model.text_pinv = pseudo_inverse(model.text_map);

    // Aspects: random directions with the photo map's range projected out,
    // rescaled to the typical norm of a mapped latent.
    const double target_norm = std::sqrt(static_cast<double>(cfg.photo_dim));
    model.aspects = Matrix(cfg.aspect_count, cfg.photo_dim);
    for (std::size_t a = 0; a < cfg.aspect_count; ++a) {
        std::vector<double> v(cfg.photo_dim);
        for (double& x : v) x = normal(rng);
        const auto coeff = mat_vec(model.photo_pinv, v);
        const auto in_range = mat_vec(model.photo_map, coeff);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] -= in_range[j];
        const double n = linalg::norm(v);
        auto dst = model.aspects.row(a);
        for (std::size_t j = 0; j < v.size(); ++j)
            dst[j] = n > 1e-9 ? f32(v[j] * target_norm / n) : 0.0;
    }
    return model;
}

std::vector<double> GeneratingModel::latent_from_photos(const ListingRecord& r) const {
    std::vector<double> z(photo_map.cols(), 0.0);
    double weight = 0.0;
    for (std::size_t j = 0; j < r.photo_count; ++j) {
        const double s = salience(j);
        const auto est = mat_vec(photo_pinv, r.photos.row(j));
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += s * est[i];
        weight += s * s;
    }
    if (weight > 0.0)
        for (double& v : z) v /= weight;
    return z;
}

std::vector<double> GeneratingModel::latent_from_text(const ListingRecord& r) const {
    return mat_vec(text_pinv, r.text_features);
}

double GeneratingModel::alignment(const ListingRecord& r) const {
    return cosine(latent_from_photos(r), latent_from_text(r));
}

std::vector<ListingRecord> generate(const GeneratorConfig& cfg) {
    const GeneratingModel model = make_generating_model(cfg);
    std::vector<ListingRecord> out;
    out.reserve(cfg.n_listings);
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::size_t i = 0; i < cfg.n_listings; ++i) {
        std::mt19937_64 rng(linalg::derive_seed(cfg.seed, kListingStreamBase + i));
        ListingRecord rec;
        rec.id = static_cast<std::int64_t>(i);
        rec.latent.resize(cfg.latent_dim);
        for (double& v : rec.latent) v = f32(normal(rng));

        rec.photo_count =
            std::uniform_int_distribution<std::size_t>(cfg.min_photos, cfg.max_photos)(rng);
        rec.text_length = std::uniform_int_distribution<std::size_t>(cfg.min_text_length,
                                                                     cfg.max_text_length)(rng);

        const auto signal = mat_vec(model.photo_map, rec.latent);
        std::uniform_int_distribution<std::size_t> pick_aspect(0, cfg.aspect_count - 1);
        rec.photos = Matrix(cfg.max_photos, cfg.photo_dim);
        for (std::size_t j = 0; j < rec.photo_count; ++j) {
            const double s = model.salience(j);
            const auto aspect = model.aspects.row(pick_aspect(rng));
            auto dst = rec.photos.row(j);
            for (std::size_t c = 0; c < cfg.photo_dim; ++c)
                dst[c] = f32(s * signal[c] + (1.0 - s) * aspect[c] + cfg.photo_noise * normal(rng));
        }

        rec.text_features = mat_vec(model.text_map, rec.latent);
        for (double& v : rec.text_features) v = f32(v + cfg.text_noise * normal(rng));
        rec.attributes = attributes_from_latent(rec.latent);
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------

const std::vector<AttributeSpec>& attribute_specs() {
    static const std::vector<AttributeSpec> specs{
        {"capacity", 4},
        {"density", 2},
        {"space_type", 3},
    };
    return specs;
}

std::map<std::string, int> attributes_from_latent(std::span<const double> latent) {
    if (latent.empty()) throw DegenerateInput("attributes_from_latent: empty latent");
    const auto at = [&](std::size_t i) { return latent[i % latent.size()]; };
    std::map<std::string, int> out;

    // Standard-normal quartiles.
    const double c = at(0);
    out["capacity"] = c < -0.6744897501960817 ? 0 : c < 0.0 ? 1 : c < 0.6744897501960817 ? 2 : 3;
    out["density"] = at(1) + at(2) > 0.0 ? 1 : 0;
    int best = 0;
    for (int k = 1; k < 3; ++k)
        if (at(3 + static_cast<std::size_t>(k)) > at(3 + static_cast<std::size_t>(best))) best = k;
    out["space_type"] = best;
    return out;
}

// ---------------------------------------------------------------------------

FilterResult apply_filters(std::vector<ListingRecord> records, const FilterConfig& cfg,
                           const AlignmentScorer& scorer) {
    FilterResult result;
    result.stats.input = records.size();
    for (auto& r : records) {
        if (r.photo_count < cfg.min_photos) {
            ++result.stats.dropped_photos;
        } else if (r.text_length < cfg.min_text_length) {
            ++result.stats.dropped_text;
        } else if (scorer && scorer(r) < cfg.alignment_threshold) {
            ++result.stats.dropped_alignment;
        } else {
            result.records.push_back(std::move(r));
        }
    }
    result.stats.kept = result.records.size();
    return result;
}

Split split(std::vector<ListingRecord> records, double holdout_fraction, std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw DegenerateInput("split: holdout fraction must be in (0, 1)");
    const std::size_t n = records.size();
    const auto h = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * holdout_fraction)));
    if (n < 2 || h >= n) throw DegenerateInput("split: one side would be empty");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> in_holdout(n, false);
    for (std::size_t i = 0; i < h; ++i) in_holdout[order[i]] = true;

    Split out;
    out.holdout.reserve(h);
    out.train.reserve(n - h);
    for (std::size_t i = 0; i < n; ++i)
        (in_holdout[i] ? out.holdout : out.train).push_back(std::move(records[i]));
    return out;
}

Dataset build_dataset(const GeneratorConfig& generator, const FilterConfig& filters,
                      double holdout_fraction) {
    const GeneratingModel model = make_generating_model(generator);
    auto filtered = apply_filters(generate(generator), filters,
                                  [&model](const ListingRecord& r) { return model.alignment(r); });
    auto parts = split(std::move(filtered.records), holdout_fraction,
                       linalg::derive_seed(generator.seed, kSplitStream));
    return {generator, filters, filtered.stats, std::move(parts.train), std::move(parts.holdout)};
}

Matrix rotated_clusters(const RotatedClustersConfig& cfg) {
    if (cfg.n == 0 || cfg.dim == 0 || cfg.subspaces == 0 || cfg.clusters == 0 ||
        cfg.dim % cfg.subspaces != 0)
        throw DegenerateInput("rotated_clusters: dim must be a positive multiple of subspaces");
    std::mt19937_64 rng(linalg::derive_seed(cfg.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t sub = cfg.dim / cfg.subspaces;
    Matrix centers(cfg.subspaces * cfg.clusters, sub);
    for (double& v : centers.values()) v = normal(rng);
    std::uniform_int_distribution<std::size_t> pick(0, cfg.clusters - 1);
    Matrix y(cfg.n, cfg.dim);
    for (std::size_t i = 0; i < cfg.n; ++i)
        for (std::size_t s = 0; s < cfg.subspaces; ++s) {
            const auto c = centers.row(s * cfg.clusters + pick(rng));
            for (std::size_t j = 0; j < sub; ++j) y(i, s * sub + j) = c[j] + cfg.noise * normal(rng);
        }
    return linalg::matmul(y, linalg::random_orthogonal(cfg.dim, linalg::derive_seed(cfg.seed, 1)));
}

Matrix text_feature_matrix(std::span<const ListingRecord> records) {
    if (records.empty()) return {};
    Matrix out(records.size(), records.front().text_features.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].text_features.size() != out.cols())
            throw ShapeMismatch("text_feature_matrix: ragged text features");
        std::copy(records[i].text_features.begin(), records[i].text_features.end(),
                  out.row(i).begin());
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

json generator_to_json(const GeneratorConfig& g) {
    return json{{"n_listings", g.n_listings},     {"latent_dim", g.latent_dim},
                {"photo_dim", g.photo_dim},       {"text_dim", g.text_dim},
                {"max_photos", g.max_photos},     {"min_photos", g.min_photos},
                {"photo_noise", g.photo_noise},   {"text_noise", g.text_noise},
                {"aspect_count", g.aspect_count}, {"salience_decay", g.salience_decay},
                {"min_text_length", g.min_text_length},
                {"max_text_length", g.max_text_length},
                {"seed", g.seed}};
}

GeneratorConfig generator_from_json(const json& j) {
    GeneratorConfig g;
    g.n_listings = j.at("n_listings");
    g.latent_dim = j.at("latent_dim");
    g.photo_dim = j.at("photo_dim");
    g.text_dim = j.at("text_dim");
    g.max_photos = j.at("max_photos");
    g.min_photos = j.at("min_photos");
    g.photo_noise = j.at("photo_noise");
    g.text_noise = j.at("text_noise");
    g.aspect_count = j.at("aspect_count");
    g.salience_decay = j.at("salience_decay");
    g.min_text_length = j.at("min_text_length");
    g.max_text_length = j.at("max_text_length");
    g.seed = j.at("seed");
    return g;
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    std::filesystem::create_directories(dir);
    const auto& g = dataset.generator;
    const std::size_t n = dataset.train.size() + dataset.holdout.size();

    std::size_t total_photos = 0;
    for (const auto* side : {&dataset.train, &dataset.holdout})
        for (const auto& r : *side) total_photos += r.photo_count;

    Matrix photos(total_photos, g.photo_dim);
    Matrix text(n, g.text_dim);
    std::string lines;
    std::size_t offset = 0;
    std::size_t row = 0;
    for (const auto* side : {&dataset.train, &dataset.holdout}) {
        const char* split_name = side == &dataset.train ? "train" : "holdout";
        for (const auto& r : *side) {
            if (r.photos.cols() != g.photo_dim || r.text_features.size() != g.text_dim)
                throw ShapeMismatch("save_dataset: record dims disagree with generator config");
            for (std::size_t j = 0; j < r.photo_count; ++j)
                std::copy(r.photos.row(j).begin(), r.photos.row(j).end(),
                          photos.row(offset + j).begin());
            std::copy(r.text_features.begin(), r.text_features.end(), text.row(row).begin());
            json line{{"id", r.id},
                      {"split", split_name},
                      {"photo_count", r.photo_count},
                      {"photo_offset", offset},
                      {"text_row", row},
                      {"text_length", r.text_length},
                      {"latent", r.latent},
                      {"attributes", r.attributes}};
            lines += line.dump();
            lines += '\n';
            offset += r.photo_count;
            ++row;
        }
    }

    const auto& s = dataset.stats;
    json meta{{"schema_version", 1},
              {"generator", generator_to_json(g)},
              {"filters",
               {{"min_photos", dataset.filters.min_photos},
                {"min_text_length", dataset.filters.min_text_length},
                {"alignment_threshold", dataset.filters.alignment_threshold}}},
              {"filter_stats",
               {{"input", s.input},
                {"dropped_photos", s.dropped_photos},
                {"dropped_text", s.dropped_text},
                {"dropped_alignment", s.dropped_alignment},
                {"kept", s.kept}}},
              {"counts", {{"train", dataset.train.size()}, {"holdout", dataset.holdout.size()}}}};

    codec::save_embeddings(dir / "photos.blemb", photos);
    codec::save_embeddings(dir / "text.blemb", text);
    io::write_file_atomic(dir / "listings.jsonl", lines);
    io::write_file_atomic(dir / "dataset.json", meta.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    Dataset ds;
    json meta;
    try {
        meta = json::parse(io::read_file(dir / "dataset.json"));
        ds.generator = generator_from_json(meta.at("generator"));
        const auto& f = meta.at("filters");
        ds.filters.min_photos = f.at("min_photos");
        ds.filters.min_text_length = f.at("min_text_length");
        ds.filters.alignment_threshold = f.at("alignment_threshold");
        const auto& s = meta.at("filter_stats");
        ds.stats.input = s.at("input");
        ds.stats.dropped_photos = s.at("dropped_photos");
        ds.stats.dropped_text = s.at("dropped_text");
        ds.stats.dropped_alignment = s.at("dropped_alignment");
        ds.stats.kept = s.at("kept");
    } catch (const json::exception& e) {
        throw FormatError((dir / "dataset.json").string() + ": " + e.what());
    }

    const Matrix photos = codec::load_embeddings(dir / "photos.blemb");
    const Matrix text = codec::load_embeddings(dir / "text.blemb");
    const auto& g = ds.generator;
    if (photos.cols() != g.photo_dim || text.cols() != g.text_dim)
        throw FormatError("dataset: embedding widths disagree with dataset.json");

    const std::string lines = io::read_file(dir / "listings.jsonl");
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < lines.size()) {
        std::size_t end = lines.find('\n', start);
        if (end == std::string::npos) end = lines.size();
        ++line_no;
        const std::string_view text_line(lines.data() + start, end - start);
        start = end + 1;
        if (text_line.empty()) continue;
        try {
            const json j = json::parse(text_line);
            ListingRecord r;
            r.id = j.at("id");
            r.photo_count = j.at("photo_count");
            const std::size_t offset = j.at("photo_offset");
            const std::size_t text_row = j.at("text_row");
            r.text_length = j.at("text_length");
            r.latent = j.at("latent").get<std::vector<double>>();
            r.attributes = j.at("attributes").get<std::map<std::string, int>>();
            if (r.photo_count > g.max_photos || offset + r.photo_count > photos.rows() ||
                text_row >= text.rows())
                throw FormatError("offsets out of range");
            r.photos = Matrix(g.max_photos, g.photo_dim);
            for (std::size_t p = 0; p < r.photo_count; ++p)
                std::copy(photos.row(offset + p).begin(), photos.row(offset + p).end(),
                          r.photos.row(p).begin());
            r.text_features.assign(text.row(text_row).begin(), text.row(text_row).end());
            const std::string split_name = j.at("split");
            if (split_name == "train") {
                ds.train.push_back(std::move(r));
            } else if (split_name == "holdout") {
                ds.holdout.push_back(std::move(r));
            } else {
                throw FormatError("unknown split \"" + split_name + "\"");
            }
        } catch (const json::exception& e) {
            throw FormatError("listings.jsonl:" + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("listings.jsonl:" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ds;
}

}  // namespace listalign::synth
