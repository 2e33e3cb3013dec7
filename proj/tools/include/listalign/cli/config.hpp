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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "listalign/align.hpp"
#include "listalign/codec.hpp"
#include "listalign/model.hpp"
#include "listalign/synth.hpp"

namespace listalign::cli {

inline constexpr int kSchemaVersion = 1;

struct CodecSettings {
    std::string kind = "opq";  ///< pq, opq, scalar or pca
    std::size_t m = 8;
    std::size_t k = 256;
    std::size_t iters = 25;
    std::size_t rotated_dim = 0;
    std::size_t outer_iters = 10;
    std::size_t inner_iters = 4;
    std::size_t pca_dim = 40;

    bool operator==(const CodecSettings&) const = default;
};

struct EvalSettings {
    std::vector<std::size_t> recall_ks{1, 5, 10};
    std::size_t probe_k = 10;
    std::vector<std::size_t> sweep_dims;  ///< empty: no sweep
    bool sweep_quantize = false;

    bool operator==(const EvalSettings&) const = default;
};

/// Everything one pipeline run needs. Model input widths follow the generator.
struct PipelineConfig {
    std::uint64_t seed = 0;
    synth::GeneratorConfig generator;
    synth::FilterConfig filters;
    double holdout_fraction = 0.5;
    model::SetEncoderConfig set_encoder;
    model::TextEncoderConfig text_encoder;
    align::LossConfig loss;
    align::TrainSchedule train;
    CodecSettings codec;
    EvalSettings eval;

    bool operator==(const PipelineConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types and a missing or unknown
/// schema_version are ConfigErrors. Syntax errors carry line and column.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Re-derives every per-component seed from `seed`.
void apply_seed(PipelineConfig& cfg, std::uint64_t seed);

std::string to_json(const PipelineConfig& cfg);

/// Seeds for model initialization, derived from the pipeline seed.
std::uint64_t set_encoder_seed(const PipelineConfig& cfg);
std::uint64_t text_encoder_seed(const PipelineConfig& cfg);

}  // namespace listalign::cli
