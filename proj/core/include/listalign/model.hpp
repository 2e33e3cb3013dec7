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
#include <span>
#include <string>
#include <vector>

#include "listalign/synth.hpp"
#include "listalign/tape.hpp"

namespace listalign::model {

struct Parameter {
    std::string name;
    Matrix value;
    bool frozen = false;
    bool decay = true;  ///< subject to decoupled weight decay

    bool operator==(const Parameter&) const = default;
};

using ParameterSet = std::vector<Parameter>;

// ---------------------------------------------------------------------------
// Set encoder: a post-norm transformer over photo tokens, pooled at the last
// real photo.

enum class Pooling { kLast, kMean };

struct SetEncoderConfig {
    std::size_t input_dim = 16;
    std::size_t d_model = 64;
    std::size_t heads = 4;
    std::size_t layers = 4;
    std::size_t ffn_mult = 4;
    std::size_t d_out = 64;
    std::size_t max_photos = 8;
    Pooling pooling = Pooling::kLast;
    bool positional = true;

    bool operator==(const SetEncoderConfig&) const = default;
};

void validate(const SetEncoderConfig& cfg);

struct SetEncoderParams {
    SetEncoderConfig config;
    ParameterSet params;

    bool operator==(const SetEncoderParams&) const = default;
};

/// Weights ~ N(0, 1/fan_in), positional embeddings ~ N(0, 0.1²), biases zero,
/// layer-norm gains one. All values are f32-representable.
SetEncoderParams init_set_encoder(const SetEncoderConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Text tower: affine layers with GELU between them.

struct TextEncoderConfig {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden{64, 64};
    std::size_t d_out = 64;

    [[nodiscard]] std::size_t layer_count() const noexcept { return hidden.size() + 1; }
    bool operator==(const TextEncoderConfig&) const = default;
};

struct TextEncoderParams {
    TextEncoderConfig config;
    ParameterSet params;  ///< layer l owns params[2l] (weight) and params[2l + 1] (bias)

    [[nodiscard]] std::size_t layer_count() const noexcept { return params.size() / 2; }
    [[nodiscard]] bool layer_frozen(std::size_t layer) const;
    void set_layer_frozen(std::size_t layer, bool frozen);
    void freeze_all(bool frozen);

    bool operator==(const TextEncoderParams&) const = default;
};

TextEncoderParams init_text_encoder(const TextEncoderConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tape plumbing

/// Parameters placed on a tape, aligned with a ParameterSet. Frozen entries
/// are constants and receive no gradient.
struct Bound {
    std::vector<Var> vars;
};

Bound bind(Tape& tape, const ParameterSet& params);
/// Gradients aligned with `params`; zero for frozen or unreached entries.
std::vector<Matrix> collect_gradients(const Tape& tape, const ParameterSet& params,
                                      const Bound& bound);

struct PhotoSetView {
    const Matrix* photos = nullptr;  ///< rows at or past `count` are never read
    std::size_t count = 0;
};

/// B × d_out unit rows.
Var photoset_forward(Tape& tape, const SetEncoderParams& params, const Bound& bound,
                     std::span<const PhotoSetView> sets);
/// B × d_out unit rows.
Var text_forward(Tape& tape, const TextEncoderParams& params, const Bound& bound,
                 const Matrix& features);

// ---------------------------------------------------------------------------
// Inference

std::vector<double> encode_photoset(const SetEncoderParams& params, const Matrix& photos,
                                    std::size_t count);
std::vector<double> encode_text(const TextEncoderParams& params, std::span<const double> features);

/// One row per record, evaluated in chunks.
Matrix encode_photosets(const SetEncoderParams& params,
                        std::span<const synth::ListingRecord> records);
Matrix encode_texts(const TextEncoderParams& params, const Matrix& features);

// ---------------------------------------------------------------------------
// Training forward/backward

struct ForwardResult {
    Tape tape;
    Var photo_embeddings;
    Var text_embeddings;
    Var logits;  ///< B × B raw cosines; row i photo set, column j text
    Bound photo_set;
    Bound text;
};

/// `detach_text` cuts the text tower out of the gradient path entirely.
ForwardResult forward_batch(const SetEncoderParams& ps, const TextEncoderParams& te,
                            std::span<const synth::ListingRecord* const> batch,
                            bool detach_text = false);

struct Gradients {
    std::vector<Matrix> photo_set;
    std::vector<Matrix> text;
};

/// Runs the tape backward from `loss`; throws StaleTape on reuse.
Gradients backward(ForwardResult& forward, Var loss, const SetEncoderParams& ps,
                   const TextEncoderParams& te);

// ---------------------------------------------------------------------------
// Checkpoint: "BLMODEL1" | u64 header length | JSON header | f32 payload

struct Checkpoint {
    SetEncoderParams photo_set;
    TextEncoderParams text;
    std::string loss_kind;  ///< "infonce" or "siglip"
    ParameterSet loss;

    bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace listalign::model
