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
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "listalign/linalg.hpp"

namespace listalign::synth {

using linalg::Matrix;

struct GeneratorConfig {
    std::size_t n_listings = 1024;
    std::size_t latent_dim = 8;
    std::size_t photo_dim = 16;
    std::size_t text_dim = 16;
    std::size_t max_photos = 64;
    std::size_t min_photos = 1;        ///< lower bound of the per-listing photo count
    double photo_noise = 0.1;
    double text_noise = 0.1;
    std::size_t aspect_count = 4;
    double salience_decay = 0.25;      ///< photo j carries signal weight 1 / (1 + decay · j)
    std::size_t min_text_length = 20;  ///< simulated profile length range, characters
    std::size_t max_text_length = 400;
    std::uint64_t seed = 0;

    bool operator==(const GeneratorConfig&) const = default;
};

/// Throws DegenerateInput on a config that cannot generate data.
void validate(const GeneratorConfig& cfg);

struct ListingRecord {
    std::int64_t id = 0;
    std::vector<double> latent;
    Matrix photos;  ///< max_photos × photo_dim; rows at or past photo_count are zero
    std::size_t photo_count = 0;
    std::vector<double> text_features;
    std::size_t text_length = 0;
    std::map<std::string, int> attributes;

    bool operator==(const ListingRecord&) const = default;
};

/// The fixed maps every listing is generated from. Aspect offsets live in the
/// orthogonal complement of the photo map's range.
struct GeneratingModel {
    Matrix photo_map;  ///< photo_dim × latent_dim
    Matrix text_map;   ///< text_dim × latent_dim
    Matrix aspects;    ///< aspect_count × photo_dim
    Matrix photo_pinv;  ///< Moore-Penrose inverse of photo_map
    Matrix text_pinv;
    double salience_decay = 0.25;

    [[nodiscard]] double salience(std::size_t position) const {
        return 1.0 / (1.0 + salience_decay * static_cast<double>(position));
    }
    /// Salience-weighted least-squares estimate of the latent from the photos.
    [[nodiscard]] std::vector<double> latent_from_photos(const ListingRecord& r) const;
    [[nodiscard]] std::vector<double> latent_from_text(const ListingRecord& r) const;
    /// Cosine between the two latent estimates; the stand-in preliminary scorer.
    [[nodiscard]] double alignment(const ListingRecord& r) const;
};

GeneratingModel make_generating_model(const GeneratorConfig& cfg);
std::vector<ListingRecord> generate(const GeneratorConfig& cfg);

// ---------------------------------------------------------------------------
// Attributes probed downstream. Pure functions of the latent.

struct AttributeSpec {
    std::string name;
    int classes;
};

const std::vector<AttributeSpec>& attribute_specs();
std::map<std::string, int> attributes_from_latent(std::span<const double> latent);

// ---------------------------------------------------------------------------

struct FilterConfig {
    std::size_t min_photos = 5;
    std::size_t min_text_length = 50;
    double alignment_threshold = 0.3;

    bool operator==(const FilterConfig&) const = default;
};

using AlignmentScorer = std::function<double(const ListingRecord&)>;

/// Each dropped record is charged to the first rule it fails, in the order
/// photos, text length, alignment.
struct FilterStats {
    std::size_t input = 0;
    std::size_t dropped_photos = 0;
    std::size_t dropped_text = 0;
    std::size_t dropped_alignment = 0;
    std::size_t kept = 0;

    [[nodiscard]] std::size_t dropped() const noexcept {
        return dropped_photos + dropped_text + dropped_alignment;
    }
    [[nodiscard]] double fraction(std::size_t count) const noexcept {
        return input == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(input);
    }
    bool operator==(const FilterStats&) const = default;
};

struct FilterResult {
    std::vector<ListingRecord> records;
    FilterStats stats;
};

FilterResult apply_filters(std::vector<ListingRecord> records, const FilterConfig& cfg,
                           const AlignmentScorer& scorer = {});

struct Split {
    std::vector<ListingRecord> train;
    std::vector<ListingRecord> holdout;
};

/// Holdout size is max(1, floor(n · fraction)); both sides keep input order.
Split split(std::vector<ListingRecord> records, double holdout_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset directory: dataset.json, listings.jsonl, photos.blemb, text.blemb.

struct Dataset {
    GeneratorConfig generator;
    FilterConfig filters;
    FilterStats stats;
    std::vector<ListingRecord> train;
    std::vector<ListingRecord> holdout;
};

/// generate → apply_filters (scored by the generating model) → split.
Dataset build_dataset(const GeneratorConfig& generator, const FilterConfig& filters,
                      double holdout_fraction);

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Codec workload: independent clusterings per sub-space, concatenated and
// then mixed by a random rotation. Product quantization on the raw axes
// cannot exploit the cluster structure; a learned rotation can.

struct RotatedClustersConfig {
    std::size_t n = 4096;
    std::size_t dim = 32;
    std::size_t subspaces = 4;
    std::size_t clusters = 16;   ///< per sub-space
    double noise = 0.05;         ///< within-cluster standard deviation
    std::uint64_t seed = 0;
};

Matrix rotated_clusters(const RotatedClustersConfig& cfg);

/// Row i is the text feature vector of records[i].
Matrix text_feature_matrix(std::span<const ListingRecord> records);

}  // namespace listalign::synth
