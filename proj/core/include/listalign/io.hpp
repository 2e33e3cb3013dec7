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

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "listalign/error.hpp"

namespace listalign::io {

/// Appends little-endian encoded scalars to an in-memory buffer.
class ByteWriter {
public:
    void bytes(std::string_view raw) { buffer_.append(raw); }
    void u8(std::uint8_t v) { buffer_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }

    void f32_array(std::span<const double> values) {
        for (double v : values) f32(static_cast<float>(v));
    }

    [[nodiscard]] const std::string& buffer() const noexcept { return buffer_; }
    std::string take() { return std::move(buffer_); }

private:
    template <class T>
    void put(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            buffer_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }

    std::string buffer_;
};

/// Reads little-endian scalars; any read past the end throws FormatError.
class ByteReader {
public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    std::string_view bytes(std::size_t n) {
        require(n);
        auto out = data_.substr(pos_, n);
        pos_ += n;
        return out;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

    void f32_array(std::span<double> out) {
        require(out.size() * 4);
        for (double& v : out) v = static_cast<double>(f32());
    }

    void expect_magic(std::string_view magic) {
        if (bytes(magic.size()) != magic)
            throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
    }

    [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void require(std::size_t n) const {
        if (n > data_.size() - pos_) throw FormatError("truncated input");
    }

    template <class T>
    T get() {
        const auto raw = bytes(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<unsigned char>(raw[i])) << (8 * i);
        return v;
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`, so readers
/// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace listalign::io
