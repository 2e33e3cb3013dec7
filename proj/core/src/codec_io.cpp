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

#include "listalign/codec_io.hpp"

#include <limits>

#include "listalign/error.hpp"
#include "listalign/io.hpp"

namespace listalign::codec {

namespace {

std::uint32_t dim32(std::size_t v) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError("dimension exceeds u32");
    return static_cast<std::uint32_t>(v);
}

void write_pq_body(io::ByteWriter& w, const PqCodebook& cb) {
    w.f32_array(cb.codebooks.values());
}

PqCodebook read_pq(io::ByteReader& r, std::size_t input_dim, std::size_t m, std::size_t k,
                   std::size_t sub_dim) {
    if (m == 0 || k == 0 || k > 256 || sub_dim == 0)
        throw FormatError("codec file: invalid PQ header");
    PqCodebook cb;
    cb.input_dim = input_dim;
    cb.m = m;
    cb.k = k;
    cb.sub_dim = sub_dim;
    cb.codebooks = Matrix(m * k, sub_dim);
    r.f32_array(cb.codebooks.values());
    return cb;
}

std::vector<double> read_vector(io::ByteReader& r, std::size_t n) {
    std::vector<double> v(n);
    r.f32_array(v);
    return v;
}

}  // namespace

std::string serialize_codec(const AnyCodec& codec) {
    io::ByteWriter w;
    w.bytes(kCodecMagic);
    w.u8(static_cast<std::uint8_t>(kind_of(codec)));
    if (const auto* pq = std::get_if<PqCodebook>(&codec)) {
        w.u32(dim32(pq->input_dim));
        w.u32(dim32(pq->m));
        w.u32(dim32(pq->k));
        w.u32(dim32(pq->sub_dim));
        write_pq_body(w, *pq);
    } else if (const auto* opq = std::get_if<OpqCodec>(&codec)) {
        w.u32(dim32(opq->input_dim));
        w.u32(dim32(opq->rotated_dim));
        w.u32(dim32(opq->pq.m));
        w.u32(dim32(opq->pq.k));
        w.u32(dim32(opq->pq.sub_dim));
        w.f32_array(opq->rotation.values());
        write_pq_body(w, opq->pq);
    } else if (const auto* sq = std::get_if<ScalarQuantizer>(&codec)) {
        w.u32(dim32(sq->dim()));
        w.f32_array(sq->min);
        w.f32_array(sq->scale);
    } else {
        const auto& pc = std::get<PcaCodec>(codec);
        w.u32(dim32(pc.pca.input_dim()));
        w.u32(dim32(pc.pca.output_dim()));
        w.f32_array(pc.pca.mean);
        w.f32_array(pc.pca.components.values());
        w.f32_array(pc.pca.explained_variance);
        w.f32_array(pc.quantizer.min);
        w.f32_array(pc.quantizer.scale);
    }
    return w.take();
}

AnyCodec deserialize_codec(std::string_view bytes) {
    io::ByteReader r(bytes);
    r.expect_magic(kCodecMagic);
    const auto kind = r.u8();
    AnyCodec out;
    switch (static_cast<CodecKind>(kind)) {
        case CodecKind::kPq: {
            const std::size_t input_dim = r.u32(), m = r.u32(), k = r.u32(), sub = r.u32();
            if (input_dim > m * sub) throw FormatError("codec file: input_dim exceeds m·sub_dim");
            out = read_pq(r, input_dim, m, k, sub);
            break;
        }
        case CodecKind::kOpq: {
            OpqCodec c;
            c.input_dim = r.u32();
            c.rotated_dim = r.u32();
            const std::size_t m = r.u32(), k = r.u32(), sub = r.u32();
            if (m * sub != c.rotated_dim || c.input_dim > c.rotated_dim)
                throw FormatError("codec file: inconsistent OPQ header");
            c.rotation = Matrix(c.rotated_dim, c.rotated_dim);
            r.f32_array(c.rotation.values());
            c.pq = read_pq(r, c.rotated_dim, m, k, sub);
            out = std::move(c);
            break;
        }
        case CodecKind::kScalar: {
            const std::size_t d = r.u32();
            ScalarQuantizer q;
            q.min = read_vector(r, d);
            q.scale = read_vector(r, d);
            out = std::move(q);
            break;
        }
        case CodecKind::kPca: {
            const std::size_t d = r.u32(), k = r.u32();
            if (k > d) throw FormatError("codec file: PCA keeps more dims than it reads");
            PcaCodec c;
            c.pca.mean = read_vector(r, d);
            c.pca.components = Matrix(k, d);
            r.f32_array(c.pca.components.values());
            c.pca.explained_variance = read_vector(r, k);
            c.quantizer.min = read_vector(r, k);
            c.quantizer.scale = read_vector(r, k);
            out = std::move(c);
            break;
        }
        default:
            throw FormatError("codec file: unknown kind " + std::to_string(kind));
    }
    if (r.remaining() != 0) throw FormatError("codec file: trailing bytes");
    return out;
}

void save_codec(const std::filesystem::path& path, const AnyCodec& codec) {
    io::write_file_atomic(path, serialize_codec(codec));
}

AnyCodec load_codec(const std::filesystem::path& path) {
    return deserialize_codec(io::read_file(path));
}

// ---------------------------------------------------------------------------

std::string serialize_embeddings(const Matrix& x) {
    io::ByteWriter w;
    w.bytes(kEmbeddingMagic);
    w.u64(x.rows());
    w.u32(dim32(x.cols()));
    w.u8(static_cast<std::uint8_t>(EmbeddingDtype::kF32));
    w.f32_array(x.values());
    return w.take();
}

std::string serialize_codes(const CodeBlock& codes) {
    io::ByteWriter w;
    w.bytes(kEmbeddingMagic);
    w.u64(codes.n);
    w.u32(dim32(codes.bytes_per_vector));
    w.u8(static_cast<std::uint8_t>(EmbeddingDtype::kU8));
    w.bytes({reinterpret_cast<const char*>(codes.codes.data()), codes.codes.size()});
    return w.take();
}

EmbeddingFile deserialize_embedding_file(std::string_view bytes) {
    io::ByteReader r(bytes);
    r.expect_magic(kEmbeddingMagic);
    const std::uint64_t n = r.u64();
    const std::size_t d = r.u32();
    const auto dtype = r.u8();
    EmbeddingFile out;
    const std::size_t width = dtype == 0 ? 4 : 1;
    if (d != 0 && n > r.remaining() / (d * width)) throw FormatError("embedding file: truncated");
    if (dtype == static_cast<std::uint8_t>(EmbeddingDtype::kF32)) {
        out.dtype = EmbeddingDtype::kF32;
        out.floats = Matrix(n, d);
        r.f32_array(out.floats.values());
    } else if (dtype == static_cast<std::uint8_t>(EmbeddingDtype::kU8)) {
        out.dtype = EmbeddingDtype::kU8;
        const auto raw = r.bytes(n * d);
        out.codes = CodeBlock{n, d, std::vector<std::uint8_t>(raw.begin(), raw.end())};
    } else {
        throw FormatError("embedding file: unknown dtype " + std::to_string(dtype));
    }
    if (r.remaining() != 0) throw FormatError("embedding file: trailing bytes");
    return out;
}

void save_embeddings(const std::filesystem::path& path, const Matrix& x) {
    io::write_file_atomic(path, serialize_embeddings(x));
}

void save_codes(const std::filesystem::path& path, const CodeBlock& codes) {
    io::write_file_atomic(path, serialize_codes(codes));
}

EmbeddingFile load_embedding_file(const std::filesystem::path& path) {
    return deserialize_embedding_file(io::read_file(path));
}

Matrix load_embeddings(const std::filesystem::path& path) {
    auto f = load_embedding_file(path);
    if (f.dtype != EmbeddingDtype::kF32) throw FormatError(path.string() + ": expected f32 payload");
    return std::move(f.floats);
}

CodeBlock load_codes(const std::filesystem::path& path) {
    auto f = load_embedding_file(path);
    if (f.dtype != EmbeddingDtype::kU8) throw FormatError(path.string() + ": expected u8 payload");
    return std::move(f.codes);
}

}  // namespace listalign::codec
