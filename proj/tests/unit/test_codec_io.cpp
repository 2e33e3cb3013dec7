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

#include <gtest/gtest.h>

#include <filesystem>

#include "listalign/codec_io.hpp"
#include "listalign/error.hpp"
#include "listalign/io.hpp"
#include "oracles.hpp"

namespace listalign::codec {
namespace {

namespace fs = std::filesystem;
using testing::gaussian;

Matrix f32_gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
    Matrix m = gaussian(r, c, seed);
    linalg::round_to_f32(m);
    return m;
}

std::vector<AnyCodec> sample_codecs() {
    const Matrix x = gaussian(200, 12, 1);
    OpqParams op;
    op.m = 4;
    op.k = 8;
    op.outer_iters = 2;
    op.rotated_dim = 16;
    return {pq_train(x, {3, 16, 5, 1}), opq_train(x, op), scalar_quantize_fit(x), pca_codec_fit(x, 5)};
}

TEST(CodecIo, EveryKindRoundTripsBitExactly) {
    const Matrix probe = gaussian(20, 12, 2);
    for (const auto& codec : sample_codecs()) {
        const std::string bytes = serialize_codec(codec);
        const AnyCodec back = deserialize_codec(bytes);
        EXPECT_EQ(kind_of(back), kind_of(codec));
        EXPECT_EQ(serialize_codec(back), bytes);
        EXPECT_EQ(encode(back, probe), encode(codec, probe));
        EXPECT_EQ(decode(back, encode(back, probe)), decode(codec, encode(codec, probe)));
    }
}

TEST(CodecIo, FileRoundTrip) {
    const fs::path dir = fs::temp_directory_path() / "listalign_codec_io";
    fs::create_directories(dir);
    const auto codecs = sample_codecs();
    save_codec(dir / "c.blcodec", codecs[1]);
    EXPECT_EQ(serialize_codec(load_codec(dir / "c.blcodec")), serialize_codec(codecs[1]));
    fs::remove_all(dir);
}

TEST(CodecIo, RejectsCorruption) {
    const std::string bytes = serialize_codec(sample_codecs()[0]);
    EXPECT_THROW(deserialize_codec(bytes.substr(0, bytes.size() - 1)), FormatError);
    EXPECT_THROW(deserialize_codec(bytes + "x"), FormatError);
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_codec(bad), FormatError);
    bad = bytes;
    bad[kCodecMagic.size()] = 9;
    EXPECT_THROW(deserialize_codec(bad), FormatError);
    EXPECT_THROW(deserialize_codec(""), FormatError);
}

TEST(EmbeddingIo, FloatPayloadRoundTrips) {
    const Matrix x = f32_gaussian(7, 5, 3);
    const auto f = deserialize_embedding_file(serialize_embeddings(x));
    EXPECT_EQ(f.dtype, EmbeddingDtype::kF32);
    EXPECT_EQ(f.floats, x);
}

TEST(EmbeddingIo, CodePayloadRoundTrips) {
    const CodeBlock c{3, 4, {0, 1, 2, 3, 255, 254, 253, 252, 9, 8, 7, 6}};
    const auto f = deserialize_embedding_file(serialize_codes(c));
    EXPECT_EQ(f.dtype, EmbeddingDtype::kU8);
    EXPECT_EQ(f.codes, c);
}

TEST(EmbeddingIo, FilesAndDtypeChecks) {
    const fs::path dir = fs::temp_directory_path() / "listalign_emb_io";
    fs::create_directories(dir);
    const Matrix x = f32_gaussian(4, 3, 4);
    save_embeddings(dir / "x.blemb", x);
    EXPECT_EQ(load_embeddings(dir / "x.blemb"), x);
    EXPECT_THROW(load_codes(dir / "x.blemb"), FormatError);
    const CodeBlock c{2, 2, {1, 2, 3, 4}};
    save_codes(dir / "c.blemb", c);
    EXPECT_EQ(load_codes(dir / "c.blemb"), c);
    EXPECT_THROW(load_embeddings(dir / "c.blemb"), FormatError);
    EXPECT_THROW(load_embeddings(dir / "missing.blemb"), IoError);
    fs::remove_all(dir);
}

TEST(EmbeddingIo, RejectsTruncationAndTrailingBytes) {
    const std::string bytes = serialize_embeddings(f32_gaussian(3, 3, 5));
    EXPECT_THROW(deserialize_embedding_file(bytes.substr(0, bytes.size() - 2)), FormatError);
    EXPECT_THROW(deserialize_embedding_file(std::string(bytes) + std::string(1, '\0')), FormatError);
}

TEST(ByteIo, LittleEndianLayout) {
    io::ByteWriter w;
    w.u32(0x01020304u);
    w.f32(1.0f);
    const std::string b = w.take();
    ASSERT_EQ(b.size(), 8u);
    EXPECT_EQ(static_cast<unsigned char>(b[0]), 0x04);
    EXPECT_EQ(static_cast<unsigned char>(b[3]), 0x01);
    io::ByteReader r(b);
    EXPECT_EQ(r.u32(), 0x01020304u);
    EXPECT_EQ(r.f32(), 1.0f);
    EXPECT_THROW(r.u8(), FormatError);
}

}  // namespace
}  // namespace listalign::codec
