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

#include "listalign/cli/config.hpp"

#include <set>

#include "json.hpp"
#include "listalign/error.hpp"
#include "listalign/io.hpp"

namespace listalign::cli {

namespace {

using json = nlohmann::json;

enum SeedStream : std::uint64_t {
    kGeneratorSeed = 1,
    kSetEncoderSeed = 2,
    kTextEncoderSeed = 3,
    kTrainSeed = 4,
};

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be rejected.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    void read(const char* key, std::size_t& out) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void read(const char* key, std::uint64_t& out, int) {
        if (const json* v = take(key)) {
            if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void read(const char* key, double& out) {
        if (const json* v = take(key)) {
            if (!v->is_number()) fail(key, "a number");
            out = v->get<double>();
        }
    }
    void read(const char* key, bool& out) {
        if (const json* v = take(key)) {
            if (!v->is_boolean()) fail(key, "a boolean");
            out = v->get<bool>();
        }
    }
    void read(const char* key, std::string& out) {
        if (const json* v = take(key)) {
            if (!v->is_string()) fail(key, "a string");
            out = v->get<std::string>();
        }
    }
    void read(const char* key, std::vector<std::size_t>& out) {
        if (const json* v = take(key)) {
            if (!v->is_array()) fail(key, "an array of non-negative integers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number_unsigned()) fail(key, "an array of non-negative integers");
                out.push_back(e.get<std::size_t>());
            }
        }
    }

    const json* child(const char* key) { return take(key); }
    [[nodiscard]] std::string path_of(const char* key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError("unknown key " + path_ + "." + key);
    }

private:
    const json* take(const char* key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }
    [[noreturn]] void fail(const char* key, const char* expected) const {
        throw ConfigError(path_ + "." + key + " must be " + expected);
    }
    [[nodiscard]] std::string where() const { return path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_generator(Section& s, synth::GeneratorConfig& g) {
    s.read("n_listings", g.n_listings);
    s.read("latent_dim", g.latent_dim);
    s.read("photo_dim", g.photo_dim);
    s.read("text_dim", g.text_dim);
    s.read("max_photos", g.max_photos);
    s.read("min_photos", g.min_photos);
    s.read("photo_noise", g.photo_noise);
    s.read("text_noise", g.text_noise);
    s.read("aspect_count", g.aspect_count);
    s.read("salience_decay", g.salience_decay);
    s.read("min_text_length", g.min_text_length);
    s.read("max_text_length", g.max_text_length);
    s.finish();
}

void read_set_encoder(Section& s, model::SetEncoderConfig& c) {
    s.read("d_model", c.d_model);
    s.read("heads", c.heads);
    s.read("layers", c.layers);
    s.read("ffn_mult", c.ffn_mult);
    s.read("d_out", c.d_out);
    std::string pooling = c.pooling == model::Pooling::kLast ? "last" : "mean";
    s.read("pooling", pooling);
    if (pooling != "last" && pooling != "mean")
        throw ConfigError(s.path_of("pooling") + " must be \"last\" or \"mean\"");
    c.pooling = pooling == "last" ? model::Pooling::kLast : model::Pooling::kMean;
    s.read("positional", c.positional);
    s.finish();
}

void read_train(Section& s, align::TrainSchedule& t) {
    if (const json* stages = s.child("stages")) {
        if (!stages->is_array()) throw ConfigError(s.path_of("stages") + " must be an array");
        t.stages.clear();
        for (std::size_t i = 0; i < stages->size(); ++i) {
            Section st((*stages)[i], s.path_of("stages") + "[" + std::to_string(i) + "]");
            align::Stage stage;
            st.read("epochs", stage.epochs);
            st.read("learning_rate", stage.learning_rate);
            st.read("unfrozen_text_layers", stage.unfrozen_text_layers);
            st.finish();
            t.stages.push_back(std::move(stage));
        }
    }
    if (const json* adam = s.child("adam")) {
        Section a(*adam, s.path_of("adam"));
        a.read("beta1", t.adam.beta1);
        a.read("beta2", t.adam.beta2);
        a.read("eps", t.adam.eps);
        a.read("weight_decay", t.adam.weight_decay);
        a.finish();
    }
    s.read("warmup_steps", t.warmup_steps);
    s.read("horizon_steps", t.horizon_steps);
    s.read("batch_size", t.batch_size);
    s.read("accumulation", t.accumulation);
    s.read("eval_every", t.eval_every);
    s.read("recall_ks", t.recall_ks);
    s.finish();
}

// Line and column of a 1-based byte offset.
std::string position_of(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void derive_dims(PipelineConfig& cfg) {
    cfg.set_encoder.input_dim = cfg.generator.photo_dim;
    cfg.set_encoder.max_photos = cfg.generator.max_photos;
    cfg.text_encoder.input_dim = cfg.generator.text_dim;
    cfg.text_encoder.d_out = cfg.set_encoder.d_out;
}

}  // namespace

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.generator.seed = linalg::derive_seed(seed, kGeneratorSeed);
    cfg.train.seed = linalg::derive_seed(seed, kTrainSeed);
}

std::uint64_t set_encoder_seed(const PipelineConfig& cfg) {
    return linalg::derive_seed(cfg.seed, kSetEncoderSeed);
}

std::uint64_t text_encoder_seed(const PipelineConfig& cfg) {
    return linalg::derive_seed(cfg.seed, kTextEncoderSeed);
}

PipelineConfig parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // Keep only the reason; the position is recomputed from the byte offset.
        std::string msg = e.what();
        if (const auto p = msg.find(": ", msg.find("parse error")); p != std::string::npos)
            msg = msg.substr(p + 2);
        throw ConfigError("config syntax error at " + position_of(text, e.byte) + ": " + msg);
    }

    PipelineConfig cfg;
    Section top(root, "config");
    const json* version = top.child("schema_version");
    if (!version) throw ConfigError("config.schema_version is required");
    if (!version->is_number_integer() || version->get<long long>() != kSchemaVersion)
        throw ConfigError("config.schema_version " + version->dump() + " is not supported (expected " +
                          std::to_string(kSchemaVersion) + ")");
    std::uint64_t seed = 0;
    top.read("seed", seed, 0);

    if (const json* g = top.child("generator")) {
        Section s(*g, "config.generator");
        read_generator(s, cfg.generator);
    }
    if (const json* f = top.child("filters")) {
        Section s(*f, "config.filters");
        s.read("min_photos", cfg.filters.min_photos);
        s.read("min_text_length", cfg.filters.min_text_length);
        s.read("alignment_threshold", cfg.filters.alignment_threshold);
        s.finish();
    }
    if (const json* sp = top.child("split")) {
        Section s(*sp, "config.split");
        s.read("holdout_fraction", cfg.holdout_fraction);
        s.finish();
    }
    if (const json* m = top.child("model")) {
        Section s(*m, "config.model");
        if (const json* se = s.child("set_encoder")) {
            Section ss(*se, "config.model.set_encoder");
            read_set_encoder(ss, cfg.set_encoder);
        }
        if (const json* te = s.child("text_encoder")) {
            Section ts(*te, "config.model.text_encoder");
            ts.read("hidden", cfg.text_encoder.hidden);
            ts.finish();
        }
        s.finish();
    }
    if (const json* l = top.child("loss")) {
        Section s(*l, "config.loss");
        std::string kind = align::to_string(cfg.loss.kind);
        s.read("kind", kind);
        cfg.loss.kind = align::parse_loss_kind(kind);
        s.finish();
    }
    if (const json* t = top.child("train")) {
        Section s(*t, "config.train");
        read_train(s, cfg.train);
    }
    if (const json* c = top.child("codec")) {
        Section s(*c, "config.codec");
        s.read("kind", cfg.codec.kind);
        s.read("m", cfg.codec.m);
        s.read("k", cfg.codec.k);
        s.read("iters", cfg.codec.iters);
        s.read("rotated_dim", cfg.codec.rotated_dim);
        s.read("outer_iters", cfg.codec.outer_iters);
        s.read("inner_iters", cfg.codec.inner_iters);
        s.read("pca_dim", cfg.codec.pca_dim);
        s.finish();
        if (cfg.codec.kind != "pq" && cfg.codec.kind != "opq" && cfg.codec.kind != "scalar" &&
            cfg.codec.kind != "pca")
            throw ConfigError("config.codec.kind must be one of pq, opq, scalar, pca");
    }
    if (const json* e = top.child("eval")) {
        Section s(*e, "config.eval");
        s.read("recall_ks", cfg.eval.recall_ks);
        s.read("probe_k", cfg.eval.probe_k);
        s.read("sweep_dims", cfg.eval.sweep_dims);
        s.read("sweep_quantize", cfg.eval.sweep_quantize);
        s.finish();
    }
    top.finish();

    apply_seed(cfg, seed);
    derive_dims(cfg);
    try {
        synth::validate(cfg.generator);
    } catch (const DegenerateInput& e) {
        throw ConfigError(std::string("config.generator: ") + e.what());
    }
    model::validate(cfg.set_encoder);
    if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0))
        throw ConfigError("config.split.holdout_fraction must lie in (0, 1)");
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text);
}

std::string to_json(const PipelineConfig& cfg) {
    const auto& g = cfg.generator;
    const auto& se = cfg.set_encoder;
    const auto& t = cfg.train;
    json stages = json::array();
    for (const auto& s : t.stages)
        stages.push_back({{"epochs", s.epochs},
                          {"learning_rate", s.learning_rate},
                          {"unfrozen_text_layers", s.unfrozen_text_layers}});
    json j = {
        {"schema_version", kSchemaVersion},
        {"seed", cfg.seed},
        {"generator",
         {{"n_listings", g.n_listings},
          {"latent_dim", g.latent_dim},
          {"photo_dim", g.photo_dim},
          {"text_dim", g.text_dim},
          {"max_photos", g.max_photos},
          {"min_photos", g.min_photos},
          {"photo_noise", g.photo_noise},
          {"text_noise", g.text_noise},
          {"aspect_count", g.aspect_count},
          {"salience_decay", g.salience_decay},
          {"min_text_length", g.min_text_length},
          {"max_text_length", g.max_text_length}}},
        {"filters",
         {{"min_photos", cfg.filters.min_photos},
          {"min_text_length", cfg.filters.min_text_length},
          {"alignment_threshold", cfg.filters.alignment_threshold}}},
        {"split", {{"holdout_fraction", cfg.holdout_fraction}}},
        {"model",
         {{"set_encoder",
           {{"d_model", se.d_model},
            {"heads", se.heads},
            {"layers", se.layers},
            {"ffn_mult", se.ffn_mult},
            {"d_out", se.d_out},
            {"pooling", se.pooling == model::Pooling::kLast ? "last" : "mean"},
            {"positional", se.positional}}},
          {"text_encoder", {{"hidden", cfg.text_encoder.hidden}}}}},
        {"loss", {{"kind", align::to_string(cfg.loss.kind)}}},
        {"train",
         {{"stages", stages},
          {"adam",
           {{"beta1", t.adam.beta1},
            {"beta2", t.adam.beta2},
            {"eps", t.adam.eps},
            {"weight_decay", t.adam.weight_decay}}},
          {"warmup_steps", t.warmup_steps},
          {"horizon_steps", t.horizon_steps},
          {"batch_size", t.batch_size},
          {"accumulation", t.accumulation},
          {"eval_every", t.eval_every},
          {"recall_ks", t.recall_ks}}},
        {"codec",
         {{"kind", cfg.codec.kind},
          {"m", cfg.codec.m},
          {"k", cfg.codec.k},
          {"iters", cfg.codec.iters},
          {"rotated_dim", cfg.codec.rotated_dim},
          {"outer_iters", cfg.codec.outer_iters},
          {"inner_iters", cfg.codec.inner_iters},
          {"pca_dim", cfg.codec.pca_dim}}},
        {"eval",
         {{"recall_ks", cfg.eval.recall_ks},
          {"probe_k", cfg.eval.probe_k},
          {"sweep_dims", cfg.eval.sweep_dims},
          {"sweep_quantize", cfg.eval.sweep_quantize}}},
    };
    return j.dump(2) + "\n";
}

}  // namespace listalign::cli
