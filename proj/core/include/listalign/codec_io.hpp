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

#include <filesystem>
#include <string>
#include <string_view>

#include "listalign/codec.hpp"

// On-disk formats, all little-endian.
//
// Codec file:
//   "BLCODEC1" | kind u8 (0=PQ 1=OPQ 2=SCALAR 3=PCA) | header (u32 dims) | f32 payload
//     PQ:     input_dim m k sub_dim            | codebooks[m·k·sub_dim]
//     OPQ:    input_dim rotated_dim m k sub_dim | rotation[rd·rd] codebooks[m·k·sub_dim]
//     SCALAR: d                                | min[d] scale[d]
//     PCA:    input_dim k                      | mean[input_dim] components[k·input_dim]
//                                                explained_variance[k] min[k] scale[k]
//
// Embedding file:
//   "BLEMB001" | n u64 | d u32 | dtype u8 (0=f32 1=u8) | row-major payload

namespace listalign::codec {

inline constexpr std::string_view kCodecMagic = "BLCODEC1";
inline constexpr std::string_view kEmbeddingMagic = "BLEMB001";

std::string serialize_codec(const AnyCodec& codec);
AnyCodec deserialize_codec(std::string_view bytes);
void save_codec(const std::filesystem::path& path, const AnyCodec& codec);
AnyCodec load_codec(const std::filesystem::path& path);

enum class EmbeddingDtype : std::uint8_t { kF32 = 0, kU8 = 1 };

struct EmbeddingFile {
    EmbeddingDtype dtype = EmbeddingDtype::kF32;
    Matrix floats;    ///< populated for kF32
    CodeBlock codes;  ///< populated for kU8
};

std::string serialize_embeddings(const Matrix& x);
std::string serialize_codes(const CodeBlock& codes);
EmbeddingFile deserialize_embedding_file(std::string_view bytes);

void save_embeddings(const std::filesystem::path& path, const Matrix& x);
void save_codes(const std::filesystem::path& path, const CodeBlock& codes);
EmbeddingFile load_embedding_file(const std::filesystem::path& path);
/// Loads an f32 embedding file; a u8 file is a FormatError.
Matrix load_embeddings(const std::filesystem::path& path);
/// Loads a u8 code file; an f32 file is a FormatError.
CodeBlock load_codes(const std::filesystem::path& path);

}  // namespace listalign::codec
