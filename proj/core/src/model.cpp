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

#include "listalign/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "json.hpp"
#include "listalign/error.hpp"
#include "listalign/io.hpp"

namespace listalign::model {

namespace {

using json = nlohmann::json;
using io::ByteReader;
using io::ByteWriter;

constexpr std::size_t kInW = 0;
constexpr std::size_t kInB = 1;
constexpr std::size_t kPos = 2;
constexpr std::size_t kLayerBase = 3;
constexpr std::size_t kPerLayer = 16;
// Offsets within a layer block.
enum LayerSlot : std::size_t {
    kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
    kLn1G, kLn1B, kW1, kB1, kW2, kB2, kLn2G, kLn2B,
};

constexpr std::size_t kInferenceChunk = 128;

Matrix random_matrix(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = static_cast<double>(static_cast<float>(normal(rng)));
    return m;
}

Parameter weight(std::string name, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    return {std::move(name), random_matrix(fan_in, fan_out, 1.0 / std::sqrt(double(fan_in)), rng),
            false, true};
}

Parameter filled(std::string name, std::size_t cols, double value) {
    return {std::move(name), Matrix(1, cols, value), false, false};
}

std::size_t layer_index(std::size_t layer, LayerSlot slot) {
    return kLayerBase + layer * kPerLayer + slot;
}

}  // namespace

void validate(const SetEncoderConfig& cfg) {
    auto fail = [](const std::string& what) { throw ConfigError("SetEncoderConfig: " + what); };
    if (cfg.input_dim < 1 || cfg.d_model < 1 || cfg.d_out < 1) fail("dims must be >= 1");
    if (cfg.heads < 1 || cfg.d_model % cfg.heads != 0) fail("d_model must be divisible by heads");
    if (cfg.layers < 1) fail("layers must be >= 1");
    if (cfg.ffn_mult < 1) fail("ffn_mult must be >= 1");
    if (cfg.max_photos < 1) fail("max_photos must be >= 1");
}

SetEncoderParams init_set_encoder(const SetEncoderConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    std::mt19937_64 rng(seed);
    const std::size_t dm = cfg.d_model;
    const std::size_t ff = dm * cfg.ffn_mult;

    SetEncoderParams out;
    out.config = cfg;
    auto& p = out.params;
    p.push_back(weight("in.w", cfg.input_dim, dm, rng));
    p.push_back(filled("in.b", dm, 0.0));
    Parameter pos{"pos", cfg.positional ? random_matrix(cfg.max_photos, dm, 0.1, rng)
                                        : Matrix(cfg.max_photos, dm),
                  !cfg.positional, false};
    p.push_back(std::move(pos));
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        p.push_back(weight(pre + "attn.wq", dm, dm, rng));
        p.push_back(filled(pre + "attn.bq", dm, 0.0));
        p.push_back(weight(pre + "attn.wk", dm, dm, rng));
        p.push_back(filled(pre + "attn.bk", dm, 0.0));
        p.push_back(weight(pre + "attn.wv", dm, dm, rng));
        p.push_back(filled(pre + "attn.bv", dm, 0.0));
        p.push_back(weight(pre + "attn.wo", dm, dm, rng));
        p.push_back(filled(pre + "attn.bo", dm, 0.0));
        p.push_back(filled(pre + "ln1.gamma", dm, 1.0));
        p.push_back(filled(pre + "ln1.beta", dm, 0.0));
        p.push_back(weight(pre + "ffn.w1", dm, ff, rng));
        p.push_back(filled(pre + "ffn.b1", ff, 0.0));
        p.push_back(weight(pre + "ffn.w2", ff, dm, rng));
        p.push_back(filled(pre + "ffn.b2", dm, 0.0));
        p.push_back(filled(pre + "ln2.gamma", dm, 1.0));
        p.push_back(filled(pre + "ln2.beta", dm, 0.0));
    }
    p.push_back(weight("out.w", dm, cfg.d_out, rng));
    p.push_back(filled("out.b", cfg.d_out, 0.0));
    return out;
}

bool TextEncoderParams::layer_frozen(std::size_t layer) const {
    if (layer >= layer_count()) throw ConfigError("text layer " + std::to_string(layer) + " does not exist");
    return params[2 * layer].frozen;
}

void TextEncoderParams::set_layer_frozen(std::size_t layer, bool frozen) {
    if (layer >= layer_count()) throw ConfigError("text layer " + std::to_string(layer) + " does not exist");
    params[2 * layer].frozen = frozen;
    params[2 * layer + 1].frozen = frozen;
}

void TextEncoderParams::freeze_all(bool frozen) {
    for (auto& p : params) p.frozen = frozen;
}

TextEncoderParams init_text_encoder(const TextEncoderConfig& cfg, std::uint64_t seed) {
    if (cfg.input_dim < 1 || cfg.d_out < 1) throw ConfigError("TextEncoderConfig: dims must be >= 1");
    for (std::size_t h : cfg.hidden)
        if (h < 1) throw ConfigError("TextEncoderConfig: hidden widths must be >= 1");
    std::mt19937_64 rng(seed);
    TextEncoderParams out;
    out.config = cfg;
    std::size_t fan_in = cfg.input_dim;
    for (std::size_t l = 0; l < cfg.layer_count(); ++l) {
        const std::size_t fan_out = l < cfg.hidden.size() ? cfg.hidden[l] : cfg.d_out;
        const std::string pre = "layer" + std::to_string(l) + ".";
        out.params.push_back(weight(pre + "w", fan_in, fan_out, rng));
        out.params.push_back(filled(pre + "b", fan_out, 0.0));
        fan_in = fan_out;
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

Bound bind_impl(Tape& tape, const ParameterSet& params, bool trainable) {
    Bound b;
    b.vars.reserve(params.size());
    for (const auto& p : params)
        b.vars.push_back(trainable && !p.frozen ? tape.leaf(p.value) : tape.constant(p.value));
    return b;
}

}  // namespace

Bound bind(Tape& tape, const ParameterSet& params) { return bind_impl(tape, params, true); }

std::vector<Matrix> collect_gradients(const Tape& tape, const ParameterSet& params,
                                      const Bound& bound) {
    if (bound.vars.size() != params.size())
        throw ShapeMismatch("collect_gradients: binding does not match parameter set");
    std::vector<Matrix> out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& g = tape.grad(bound.vars[i]);
        if (params[i].frozen || g.empty())
            out.emplace_back(params[i].value.rows(), params[i].value.cols());
        else
            out.push_back(g);
    }
    return out;
}

Var photoset_forward(Tape& tape, const SetEncoderParams& params, const Bound& bound,
                     std::span<const PhotoSetView> sets) {
    const auto& cfg = params.config;
    const auto& v = bound.vars;
    if (v.size() != kLayerBase + cfg.layers * kPerLayer + 2)
        throw ShapeMismatch("photoset_forward: binding does not match config");
    if (sets.empty()) throw DegenerateInput("photoset_forward: empty batch");

    std::size_t tokens = 0;
    for (const auto& s : sets) {
        if (s.photos == nullptr || s.count < 1 || s.count > cfg.max_photos)
            throw DegenerateInput("photo count must be in [1, " + std::to_string(cfg.max_photos) + "]");
        if (s.photos->rows() < s.count || s.photos->cols() != cfg.input_dim)
            throw ShapeMismatch("photo matrix shape does not match the encoder");
        tokens += s.count;
    }

    // Padded rows are never tokenized, so they cannot influence any output.
    Matrix x(tokens, cfg.input_dim);
    std::vector<std::size_t> positions;
    std::vector<Segment> segments;
    std::vector<std::size_t> last_rows;
    positions.reserve(tokens);
    std::size_t offset = 0;
    for (const auto& s : sets) {
        for (std::size_t j = 0; j < s.count; ++j) {
            std::copy(s.photos->row(j).begin(), s.photos->row(j).end(), x.row(offset + j).begin());
            positions.push_back(j);
        }
        segments.push_back({offset, s.count});
        last_rows.push_back(offset + s.count - 1);
        offset += s.count;
    }

    using namespace ops;
    Var h = add_row(tape, matmul(tape, tape.constant(std::move(x)), v[kInW]), v[kInB]);
    if (cfg.positional) h = add(tape, h, gather_rows(tape, v[kPos], std::move(positions)));

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        auto p = [&](LayerSlot s) { return v[layer_index(l, s)]; };
        Var q = add_row(tape, matmul(tape, h, p(kWq)), p(kBq));
        Var k = add_row(tape, matmul(tape, h, p(kWk)), p(kBk));
        Var val = add_row(tape, matmul(tape, h, p(kWv)), p(kBv));
        Var att = segment_attention(tape, q, k, val, segments, cfg.heads);
        Var o = add_row(tape, matmul(tape, att, p(kWo)), p(kBo));
        h = layer_norm(tape, add(tape, h, o), p(kLn1G), p(kLn1B));
        Var f = gelu(tape, add_row(tape, matmul(tape, h, p(kW1)), p(kB1)));
        f = add_row(tape, matmul(tape, f, p(kW2)), p(kB2));
        h = layer_norm(tape, add(tape, h, f), p(kLn2G), p(kLn2B));
    }

    Var pooled = cfg.pooling == Pooling::kLast ? gather_rows(tape, h, std::move(last_rows))
                                               : segment_mean(tape, h, std::move(segments));
    const std::size_t out_w = kLayerBase + cfg.layers * kPerLayer;
    return l2_normalize_rows(tape, add_row(tape, matmul(tape, pooled, v[out_w]), v[out_w + 1]));
}

Var text_forward(Tape& tape, const TextEncoderParams& params, const Bound& bound,
                 const Matrix& features) {
    if (features.cols() != params.config.input_dim)
        throw ShapeMismatch("text_forward: expected " + std::to_string(params.config.input_dim) +
                            " features, got " + std::to_string(features.cols()));
    if (bound.vars.size() != params.params.size())
        throw ShapeMismatch("text_forward: binding does not match parameters");
    using namespace ops;
    Var h = tape.constant(features);
    const std::size_t layers = params.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        h = add_row(tape, matmul(tape, h, bound.vars[2 * l]), bound.vars[2 * l + 1]);
        if (l + 1 < layers) h = gelu(tape, h);
    }
    return l2_normalize_rows(tape, h);
}

// ---------------------------------------------------------------------------

std::vector<double> encode_photoset(const SetEncoderParams& params, const Matrix& photos,
                                    std::size_t count) {
    Tape tape;
    const Bound b = bind_impl(tape, params.params, false);
    const PhotoSetView view{&photos, count};
    const Var out = photoset_forward(tape, params, b, std::span(&view, 1));
    const auto row = tape.value(out).row(0);
    return {row.begin(), row.end()};
}

std::vector<double> encode_text(const TextEncoderParams& params, std::span<const double> features) {
    Tape tape;
    const Bound b = bind_impl(tape, params.params, false);
    const Var out = text_forward(tape, params, b, Matrix::row_vector(features));
    const auto row = tape.value(out).row(0);
    return {row.begin(), row.end()};
}

Matrix encode_photosets(const SetEncoderParams& params,
                        std::span<const synth::ListingRecord> records) {
    Matrix out(records.size(), params.config.d_out);
    for (std::size_t start = 0; start < records.size(); start += kInferenceChunk) {
        const std::size_t end = std::min(records.size(), start + kInferenceChunk);
        std::vector<PhotoSetView> views;
        for (std::size_t i = start; i < end; ++i)
            views.push_back({&records[i].photos, records[i].photo_count});
        Tape tape;
        const Bound b = bind_impl(tape, params.params, false);
        const Matrix& emb = tape.value(photoset_forward(tape, params, b, views));
        for (std::size_t i = start; i < end; ++i)
            std::copy(emb.row(i - start).begin(), emb.row(i - start).end(), out.row(i).begin());
    }
    return out;
}

Matrix encode_texts(const TextEncoderParams& params, const Matrix& features) {
    Tape tape;
    const Bound b = bind_impl(tape, params.params, false);
    return tape.value(text_forward(tape, params, b, features));
}

// ---------------------------------------------------------------------------

ForwardResult forward_batch(const SetEncoderParams& ps, const TextEncoderParams& te,
                            std::span<const synth::ListingRecord* const> batch, bool detach_text) {
    if (batch.size() < 2) throw DegenerateInput("forward_batch: batch size must be >= 2");
    if (ps.config.d_out != te.config.d_out)
        throw ShapeMismatch("forward_batch: towers disagree on output dimension");

    ForwardResult r;
    r.photo_set = bind(r.tape, ps.params);
    r.text = detach_text ? bind_impl(r.tape, te.params, false) : bind(r.tape, te.params);

    std::vector<PhotoSetView> views;
    views.reserve(batch.size());
    Matrix features(batch.size(), te.config.input_dim);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        views.push_back({&batch[i]->photos, batch[i]->photo_count});
        if (batch[i]->text_features.size() != te.config.input_dim)
            throw ShapeMismatch("forward_batch: text feature width mismatch");
        std::copy(batch[i]->text_features.begin(), batch[i]->text_features.end(),
                  features.row(i).begin());
    }
    r.photo_embeddings = photoset_forward(r.tape, ps, r.photo_set, views);
    r.text_embeddings = text_forward(r.tape, te, r.text, features);
    r.logits = ops::matmul_nt(r.tape, r.photo_embeddings, r.text_embeddings);
    return r;
}

Gradients backward(ForwardResult& forward, Var loss, const SetEncoderParams& ps,
                   const TextEncoderParams& te) {
    forward.tape.backward(loss);
    return {collect_gradients(forward.tape, ps.params, forward.photo_set),
            collect_gradients(forward.tape, te.params, forward.text)};
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

constexpr std::string_view kCheckpointMagic = "BLMODEL1";
constexpr int kCheckpointVersion = 1;

json tensor_table(const ParameterSet& params) {
    json out = json::array();
    for (const auto& p : params)
        out.push_back({{"name", p.name},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"frozen", p.frozen},
                       {"decay", p.decay}});
    return out;
}

ParameterSet read_tensors(const json& table, ByteReader& reader) {
    ParameterSet out;
    for (const auto& t : table) {
        Parameter p;
        p.name = t.at("name").get<std::string>();
        const auto rows = t.at("rows").get<std::size_t>();
        const auto cols = t.at("cols").get<std::size_t>();
        p.frozen = t.at("frozen").get<bool>();
        p.decay = t.at("decay").get<bool>();
        p.value = Matrix(rows, cols);
        reader.f32_array(p.value.values());
        out.push_back(std::move(p));
    }
    return out;
}

void write_tensors(const ParameterSet& params, ByteWriter& writer) {
    for (const auto& p : params) writer.f32_array(p.value.values());
}

void expect_shapes(const ParameterSet& got, const ParameterSet& expected, const char* what) {
    if (got.size() != expected.size())
        throw FormatError(std::string("checkpoint: ") + what + " tensor count mismatch");
    for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i].name != expected[i].name || got[i].value.rows() != expected[i].value.rows() ||
            got[i].value.cols() != expected[i].value.cols())
            throw FormatError(std::string("checkpoint: unexpected tensor ") + got[i].name);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    const auto& sc = ckpt.photo_set.config;
    const auto& tc = ckpt.text.config;
    json header = {
        {"version", kCheckpointVersion},
        {"photo_set",
         {{"config",
           {{"input_dim", sc.input_dim},
            {"d_model", sc.d_model},
            {"heads", sc.heads},
            {"layers", sc.layers},
            {"ffn_mult", sc.ffn_mult},
            {"d_out", sc.d_out},
            {"max_photos", sc.max_photos},
            {"pooling", sc.pooling == Pooling::kLast ? "last" : "mean"},
            {"positional", sc.positional}}},
          {"tensors", tensor_table(ckpt.photo_set.params)}}},
        {"text",
         {{"config", {{"input_dim", tc.input_dim}, {"hidden", tc.hidden}, {"d_out", tc.d_out}}},
          {"tensors", tensor_table(ckpt.text.params)}}},
        {"loss", {{"kind", ckpt.loss_kind}, {"tensors", tensor_table(ckpt.loss)}}},
    };
    const std::string text = header.dump();
    ByteWriter w;
    w.bytes(kCheckpointMagic);
    w.u64(text.size());
    w.bytes(text);
    write_tensors(ckpt.photo_set.params, w);
    write_tensors(ckpt.text.params, w);
    write_tensors(ckpt.loss, w);
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    ByteReader r(bytes);
    r.expect_magic(kCheckpointMagic);
    const std::uint64_t len = r.u64();
    if (len > r.remaining()) throw FormatError("checkpoint: header length exceeds file size");
    json header;
    try {
        header = json::parse(r.bytes(static_cast<std::size_t>(len)));
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
    }
    try {
        if (header.at("version").get<int>() != kCheckpointVersion)
            throw FormatError("checkpoint: unsupported version");
        Checkpoint c;
        const auto& sj = header.at("photo_set").at("config");
        auto& sc = c.photo_set.config;
        sc.input_dim = sj.at("input_dim").get<std::size_t>();
        sc.d_model = sj.at("d_model").get<std::size_t>();
        sc.heads = sj.at("heads").get<std::size_t>();
        sc.layers = sj.at("layers").get<std::size_t>();
        sc.ffn_mult = sj.at("ffn_mult").get<std::size_t>();
        sc.d_out = sj.at("d_out").get<std::size_t>();
        sc.max_photos = sj.at("max_photos").get<std::size_t>();
        const auto pooling = sj.at("pooling").get<std::string>();
        if (pooling != "last" && pooling != "mean") throw FormatError("checkpoint: bad pooling");
        sc.pooling = pooling == "last" ? Pooling::kLast : Pooling::kMean;
        sc.positional = sj.at("positional").get<bool>();
        try {
            validate(sc);
        } catch (const ConfigError& e) {
            throw FormatError(std::string("checkpoint: ") + e.what());
        }
        const auto& tj = header.at("text").at("config");
        c.text.config.input_dim = tj.at("input_dim").get<std::size_t>();
        c.text.config.hidden = tj.at("hidden").get<std::vector<std::size_t>>();
        c.text.config.d_out = tj.at("d_out").get<std::size_t>();
        c.loss_kind = header.at("loss").at("kind").get<std::string>();

        c.photo_set.params = read_tensors(header.at("photo_set").at("tensors"), r);
        c.text.params = read_tensors(header.at("text").at("tensors"), r);
        c.loss = read_tensors(header.at("loss").at("tensors"), r);
        if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");

        expect_shapes(c.photo_set.params, init_set_encoder(sc, 0).params, "photo_set");
        expect_shapes(c.text.params, init_text_encoder(c.text.config, 0).params, "text");
        return c;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: bad header: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    io::write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(io::read_file(path));
}

}  // namespace listalign::model
