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

// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are pinned below and are not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "listalign/align.hpp"
#include "listalign/cli/cli.hpp"
#include "listalign/cli/config.hpp"
#include "listalign/codec.hpp"
#include "listalign/codec_io.hpp"
#include "listalign/eval.hpp"
#include "listalign/io.hpp"
#include "listalign/model.hpp"
#include "listalign/synth.hpp"
#include "oracles.hpp"

namespace {

using namespace listalign;
using linalg::Matrix;
namespace fs = std::filesystem;

// -- pinned tolerances --------------------------------------------------------
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradFloor = 1e-5;       // absolute scale for tensors with zero true gradient
constexpr double kGradBudgetSec = 30.0;
constexpr double kMinRecallAt1 = 0.90;
constexpr double kMaxMeanRank = 2.0;
constexpr double kMaxUntrainedRecall = 3.0 / 512.0;
constexpr double kTrainBudgetSec = 600.0;
constexpr double kStageTieAllowance = 0.05;
constexpr double kMinOpqReductionPct = 20.0;
constexpr double kObjectiveSlack = 1e-9;   // relative, absorbs summation-order rounding
constexpr double kOpqBudgetSec = 120.0;
constexpr double kMaxQuantRecallDelta = 0.01;
constexpr double kExactTol = 1e-9;
constexpr double kUniformLossTol = 1e-12;
constexpr double kOrderSensitivity = 1e-6;
constexpr double kMeanPoolInvariance = 1e-6;
constexpr std::size_t kQuantDim = 40;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// -- shared runs ----------------------------------------------------------------

cli::PipelineConfig standard_config(std::uint64_t seed) {
    auto cfg = cli::load_config(fs::path(LISTALIGN_CONFIG_DIR) / "desk.json");
    cli::apply_seed(cfg, seed);
    return cfg;
}

align::Model initial_model(const cli::PipelineConfig& cfg) {
    auto se = cfg.set_encoder;
    se.input_dim = cfg.generator.photo_dim;
    se.max_photos = cfg.generator.max_photos;
    auto te = cfg.text_encoder;
    te.input_dim = cfg.generator.text_dim;
    te.d_out = se.d_out;
    return {model::init_set_encoder(se, cli::set_encoder_seed(cfg)),
            model::init_text_encoder(te, cli::text_encoder_seed(cfg)), cfg.loss,
            align::init_loss_params(cfg.loss)};
}

// Same total epochs, stage-one rate, fine-stage layers unfrozen throughout.
align::TrainSchedule single_stage(align::TrainSchedule s) {
    align::Stage only;
    only.epochs = 0;
    for (const auto& st : s.stages) only.epochs += st.epochs;
    only.learning_rate = s.stages.front().learning_rate;
    only.unfrozen_text_layers = s.stages.back().unfrozen_text_layers;
    s.stages = {only};
    return s;
}

struct Embeddings {
    Matrix train_photo, train_text, test_photo, test_text;
};

Embeddings embed(const align::Model& m, const synth::Dataset& ds) {
    return {model::encode_photosets(m.photo_set, ds.train),
            model::encode_texts(m.text, synth::text_feature_matrix(ds.train)),
            model::encode_photosets(m.photo_set, ds.holdout),
            model::encode_texts(m.text, synth::text_feature_matrix(ds.holdout))};
}

struct SeedRun {
    cli::PipelineConfig cfg;
    synth::Dataset data;
    align::Model init;
    align::TrainResult two_stage;
    std::optional<align::TrainResult> one_stage;
    Embeddings emb;
    double train_seconds = 0.0;
};

std::map<std::uint64_t, SeedRun>& runs() {
    static std::map<std::uint64_t, SeedRun> cache;
    return cache;
}

SeedRun& run_for(std::uint64_t seed) {
    auto it = runs().find(seed);
    if (it != runs().end()) return it->second;
    SeedRun r;
    r.cfg = standard_config(seed);
    r.data = synth::build_dataset(r.cfg.generator, r.cfg.filters, r.cfg.holdout_fraction);
    r.init = initial_model(r.cfg);
    const auto t0 = std::chrono::steady_clock::now();
    r.two_stage = align::train(r.data.train, r.data.holdout, r.init, r.cfg.train);
    r.train_seconds = seconds_since(t0);
    r.emb = embed(r.two_stage.model, r.data);
    return runs().emplace(seed, std::move(r)).first->second;
}

// -- 1 ------------------------------------------------------------------------------

double tensor_error(const Matrix& analytic, const std::function<double(const Matrix&)>& f, const Matrix& at) {
    return testing::relative_error(analytic, testing::numeric_gradient(f, at, kGradStep), kGradFloor);
}

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_name;
    auto track = [&](double e, const std::string& name) {
        if (e > worst) {
            worst = e;
            worst_name = name;
        }
    };
    auto scalar_d = [](const std::function<double(double)>& f, double x) {
        return (f(x + kGradStep) - f(x - kGradStep)) / (2 * kGradStep);
    };
    auto scalar_err = [](double a, double n) {
        return std::abs(a - n) / std::max({std::abs(a), std::abs(n), kGradFloor});
    };

    for (std::uint64_t seed : kSeeds) {
        const Matrix logits = testing::gaussian(4, 4, seed, 0.5);
        const double s = std::log(14.0);
        const auto gi = align::infonce_gradient(logits, s);
        track(tensor_error(gi.d_logits, [&](const Matrix& x) { return align::infonce_loss(x, std::exp(-s)); }, logits),
              "infonce logits");
        track(scalar_err(gi.d_log_scale, scalar_d([&](double v) { return align::infonce_loss(logits, std::exp(-v)); }, s)),
              "infonce log_scale");
        const double ss = std::log(10.0), b = -10.0;
        const auto gs = align::siglip_gradient(logits, ss, b);
        track(tensor_error(gs.d_logits, [&](const Matrix& x) { return align::siglip_loss(x, std::exp(ss), b); }, logits),
              "siglip logits");
        track(scalar_err(gs.d_log_scale, scalar_d([&](double v) { return align::siglip_loss(logits, std::exp(v), b); }, ss)),
              "siglip log_scale");
        track(scalar_err(gs.d_bias, scalar_d([&](double v) { return align::siglip_loss(logits, std::exp(ss), v); }, b)),
              "siglip bias");

        // Full path: B = 4 listings, up to P = 3 photos, d_model = 8.
        const auto records = testing::tiny_records(4, 3, 6, seed);
        std::vector<const synth::ListingRecord*> batch;
        for (const auto& r : records) batch.push_back(&r);
        model::SetEncoderConfig sc;
        sc.input_dim = 6;
        sc.d_model = 8;
        sc.heads = 2;
        sc.layers = 2;
        sc.ffn_mult = 2;
        sc.d_out = 8;
        sc.max_photos = 3;
        model::TextEncoderConfig tc;
        tc.input_dim = 6;
        tc.hidden = {8, 8};
        tc.d_out = 8;
        for (align::LossKind kind : {align::LossKind::kInfoNce, align::LossKind::kSigLip}) {
            align::Model m{model::init_set_encoder(sc, seed * 10), model::init_text_encoder(tc, seed * 10 + 1),
                           {kind}, align::init_loss_params({kind})};
            auto objective = [&](const align::Model& mm, model::Gradients* g, std::vector<Matrix>* gl) {
                auto fw = model::forward_batch(mm.photo_set, mm.text, batch);
                const auto lb = model::bind(fw.tape, mm.loss_params);
                const auto loss = align::loss_on_tape(fw.tape, mm.loss, fw.logits, lb);
                const double v = fw.tape.value(loss)(0, 0);
                if (g) {
                    *g = model::backward(fw, loss, mm.photo_set, mm.text);
                    *gl = model::collect_gradients(fw.tape, mm.loss_params, lb);
                }
                return v;
            };
            model::Gradients g;
            std::vector<Matrix> gl;
            objective(m, &g, &gl);
            const std::string tag = align::to_string(kind) + " seed " + std::to_string(seed) + " ";
            for (std::size_t i = 0; i < m.photo_set.params.size(); ++i) {
                if (m.photo_set.params[i].frozen) continue;
                track(tensor_error(g.photo_set[i], [&](const Matrix& x) {
                          auto p = m;
                          p.photo_set.params[i].value = x;
                          return objective(p, nullptr, nullptr);
                      }, m.photo_set.params[i].value),
                      tag + m.photo_set.params[i].name);
            }
            for (std::size_t i = 0; i < m.text.params.size(); ++i)
                track(tensor_error(g.text[i], [&](const Matrix& x) {
                          auto p = m;
                          p.text.params[i].value = x;
                          return objective(p, nullptr, nullptr);
                      }, m.text.params[i].value),
                      tag + m.text.params[i].name);
            for (std::size_t i = 0; i < m.loss_params.size(); ++i)
                track(tensor_error(gl[i], [&](const Matrix& x) {
                          auto p = m;
                          p.loss_params[i].value = x;
                          return objective(p, nullptr, nullptr);
                      }, m.loss_params[i].value),
                      tag + m.loss_params[i].name);
        }
    }
    const double secs = seconds_since(t0);
    return {worst < kGradRelTol && secs < kGradBudgetSec,
            "worst relative error " + std::to_string(worst) + " (" + worst_name + "), " + fmt(secs, 1) + " s"};
}

// -- 2 ------------------------------------------------------------------------------

Outcome alignment_recovery() {
    auto& r = run_for(kSeeds.front());
    const std::vector<std::size_t> ks{1, 5, 10};
    const auto trained = eval::retrieval_metrics(r.emb.test_text, r.emb.test_photo, ks);
    const auto untrained = align::evaluate(r.init, r.data.holdout, ks);
    const bool pass = trained.recall_t2i.at(1) >= kMinRecallAt1 && trained.mean_rank_t2i <= kMaxMeanRank &&
                      untrained.recall_t2i.at(1) <= kMaxUntrainedRecall && r.train_seconds < kTrainBudgetSec;
    return {pass, "holdout n=" + std::to_string(trained.n_queries) + ", R@1 t2i " + fmt(trained.recall_t2i.at(1)) +
                      ", MR t2i " + fmt(trained.mean_rank_t2i, 3) + ", untrained R@1 " +
                      fmt(untrained.recall_t2i.at(1)) + ", train " + fmt(r.train_seconds, 1) + " s"};
}

// -- 3 ------------------------------------------------------------------------------

Outcome coarse_then_fine() {
    double two = 0.0, one = 0.0;
    std::ostringstream per;
    for (std::uint64_t seed : kSeeds) {
        auto& r = run_for(seed);
        if (!r.one_stage) r.one_stage = align::train(r.data.train, r.data.holdout, r.init, single_stage(r.cfg.train));
        const double a = r.two_stage.log.epochs.back().holdout.mean_rank_t2i;
        const double b = r.one_stage->log.epochs.back().holdout.mean_rank_t2i;
        two += a;
        one += b;
        per << " s" << seed << " " << fmt(a, 4) << "/" << fmt(b, 4);
    }
    two /= static_cast<double>(kSeeds.size());
    one /= static_cast<double>(kSeeds.size());
    return {two <= one * (1.0 + kStageTieAllowance),
            "mean MR t2i two-stage " + fmt(two) + " vs single-stage " + fmt(one) + " (limit " +
                fmt(one * (1.0 + kStageTieAllowance)) + ");" + per.str()};
}

// -- 4 ------------------------------------------------------------------------------

Outcome opq_vs_pq() {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = true;
    double min_red = 1e9;
    bool monotone = true;
    for (std::uint64_t seed : kSeeds) {
        synth::RotatedClustersConfig rc;
        rc.seed = seed;
        const Matrix x = synth::rotated_clusters(rc);
        const std::uint64_t cseed = linalg::derive_seed(seed, 5);
        const auto pq = codec::pq_train(x, {4, 16, 25, cseed});
        codec::OpqParams op;
        op.m = 4;
        op.k = 16;
        op.init_iters = 25;
        op.outer_iters = 20;
        op.seed = cseed;
        std::vector<double> objective;
        const auto opq = codec::opq_train(x, op, &objective);
        const auto rp = codec::compression_report(x, codec::pq_decode(pq, codec::pq_encode(pq, x)));
        const auto ro = codec::compression_report(x, codec::opq_decode(opq, codec::opq_encode(opq, x)));
        const double red = codec::relative_reduction(rp, ro)[2];
        min_red = std::min(min_red, red);
        pass = pass && red >= kMinOpqReductionPct;
        for (std::size_t i = 1; i < objective.size(); ++i)
            if (objective[i] > objective[i - 1] * (1.0 + kObjectiveSlack)) monotone = false;
    }
    const double secs = seconds_since(t0);
    return {pass && monotone && secs < kOpqBudgetSec,
            "min p50 reduction " + fmt(min_red, 2) + "% over 3 seeds, objective " +
                (monotone ? "monotone" : "NOT monotone") + ", " + fmt(secs, 1) + " s"};
}

// -- 5 / 6 --------------------------------------------------------------------------

std::vector<eval::SweepRow> sweep(const Embeddings& e, const std::vector<std::size_t>& dims, bool q) {
    const eval::SweepInput in{&e.train_photo, &e.train_text, &e.test_photo, &e.test_text};
    const std::vector<std::size_t> ks{10};
    return eval::pca_dim_sweep(in, dims, q, ks);
}

Outcome quantization_fidelity() {
    bool pass = true;
    std::ostringstream per;
    for (std::uint64_t seed : kSeeds) {
        const auto& e = run_for(seed).emb;
        const double f = sweep(e, {kQuantDim}, false)[0].metrics.recall_t2i.at(10);
        const double q = sweep(e, {kQuantDim}, true)[0].metrics.recall_t2i.at(10);
        pass = pass && std::abs(f - q) <= kMaxQuantRecallDelta;
        per << " s" << seed << " " << fmt(f) << "/" << fmt(q);
    }
    return {pass, "R@10 t2i float/8-bit at dim 40:" + per.str()};
}

Outcome diminishing_returns() {
    bool pass = true;
    std::ostringstream per;
    for (std::uint64_t seed : kSeeds) {
        const auto& e = run_for(seed).emb;
        const std::size_t full = e.test_photo.cols();
        const auto rows = sweep(e, {2, 8, 32, full}, false);
        const double r2 = rows[0].metrics.recall_t2i.at(10), r8 = rows[1].metrics.recall_t2i.at(10);
        const double r32 = rows[2].metrics.recall_t2i.at(10), rf = rows[3].metrics.recall_t2i.at(10);
        pass = pass && (rf - r32) < (r8 - r2);
        per << " s" << seed << " [" << fmt(r2, 3) << ", " << fmt(r8, 3) << ", " << fmt(r32, 3) << ", " << fmt(rf, 3)
            << "]";
    }
    return {pass, "R@10 t2i at dims 2/8/32/full:" + per.str()};
}

// -- 7 ------------------------------------------------------------------------------

Outcome metric_exactness() {
    bool ok = true;
    const std::vector<std::size_t> r2{7, 3}, r3{1, 2, 3};
    ok &= std::abs(eval::ndcg_binary(r2, {7}, 2) - 1.0) <= kExactTol;
    ok &= std::abs(eval::ndcg_binary(r2, {3}, 2) - 1.0 / std::log2(3.0)) <= kExactTol;
    ok &= std::abs(eval::ndcg_binary(r3, {1, 3}, 3) - 1.5 / (1.0 + 1.0 / std::log2(3.0))) <= kExactTol;

    const std::size_t n = 8;
    Matrix q = Matrix::identity(n), g(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        g(j, j) = 0.8;
        g(j, (j + n - 1) % n) = 0.9;
    }
    g = linalg::normalize_rows(g);
    const std::vector<std::size_t> ks{1, 5};
    const auto m = eval::retrieval_metrics(q, g, ks);
    ok &= m.recall_t2i.at(1) == 0.0 && m.recall_t2i.at(5) == 1.0 && m.mean_rank_t2i == 2.0;

    double worst = 0.0;
    for (std::size_t b : {2u, 4u, 16u, 64u, 512u})
        worst = std::max(worst, std::abs(align::infonce_loss(Matrix(b, b, 0.3), 1.0 / 14.0) - std::log(b)));
    ok &= worst <= kUniformLossTol;
    return {ok, "NDCG examples, rank-2 construction (MR " + fmt(m.mean_rank_t2i, 1) +
                    "), uniform-logit loss max deviation " + std::to_string(worst)};
}

// -- 8 ------------------------------------------------------------------------------

Outcome code_layout() {
    const Matrix x = linalg::normalize_rows(testing::gaussian(512, 1024, 21));
    codec::OpqParams op;
    op.m = 256;
    op.k = 256;
    op.rotated_dim = 1280;
    op.outer_iters = 1;
    op.init_iters = 2;
    op.inner_iters = 1;
    op.seed = 3;
    const codec::AnyCodec opq = codec::opq_train(x, op);
    const auto opq_codes = codec::encode(opq, x);
    const auto opq_file = codec::serialize_codes(opq_codes);
    const auto header = codec::serialize_codes(codec::CodeBlock{0, opq_codes.bytes_per_vector, {}}).size();

    const auto& e = run_for(kSeeds.front()).emb;
    const codec::AnyCodec pca = codec::pca_codec_fit(e.train_photo, 40);
    const auto pca_codes = codec::encode(pca, e.test_photo);
    const auto pca_file = codec::serialize_codes(pca_codes);

    const bool pass = opq_codes.bytes_per_vector == 256 && codec::bytes_per_vector(opq) == 256 &&
                      opq_file.size() == header + 512 * 256 && pca_codes.bytes_per_vector == 40 &&
                      pca_file.size() == header + e.test_photo.rows() * 40;
    return {pass, "OPQ 1024->1280, m=256, k=256: " + std::to_string(opq_codes.bytes_per_vector) +
                      " B/vector; PCA-40 8-bit: " + std::to_string(pca_codes.bytes_per_vector) +
                      " B/vector; header " + std::to_string(header) + " B"};
}

// -- 9 ------------------------------------------------------------------------------

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

std::map<std::string, std::string> pipeline_artifacts(const fs::path& root, std::uint64_t seed) {
    fs::remove_all(root);
    const std::string config = (fs::path(LISTALIGN_CONFIG_DIR) / "desk.json").string();
    const std::string s = std::to_string(seed);
    const std::string data = (root / "data").string(), run = (root / "run").string();
    const std::string ev = (root / "eval").string(), q = (root / "codes").string();
    if (cli({"--config", config, "--seed", s, "--out", data, "--quiet", "gen"}) != 0 ||
        cli({"--config", config, "--seed", s, "--out", run, "--quiet", "train", "--data", data}) != 0 ||
        cli({"--config", config, "--seed", s, "--out", ev, "--quiet", "eval", "--model", run + "/model.blmodel",
             "--data", data}) != 0 ||
        cli({"--config", config, "--seed", s, "--out", q, "--quiet", "quantize", "--in", ev + "/photo.blemb"}) != 0)
        throw std::runtime_error("pipeline command failed");
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root))
        if (entry.is_regular_file())
            files[fs::relative(entry.path(), root).string()] = io::read_file(entry.path());
    return files;
}

Outcome determinism_and_persistence() {
    const fs::path base = fs::temp_directory_path() / "listalign_acceptance";
    const auto a = pipeline_artifacts(base / "a", 7);
    const auto b = pipeline_artifacts(base / "b", 7);
    bool same = a.size() == b.size();
    std::string diff;
    for (const auto& [name, bytes] : a) {
        const auto it = b.find(name);
        if (it == b.end() || it->second != bytes) {
            same = false;
            diff += " " + name;
        }
    }

    // Round trips: each reload re-serializes to the same bytes.
    std::vector<std::string> inexact;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) inexact.push_back(what);
    };
    const auto& ckpt_bytes = a.at("run/model.blmodel");
    check(model::serialize_checkpoint(model::deserialize_checkpoint(ckpt_bytes)) == ckpt_bytes, "checkpoint file");
    const auto& r = run_for(kSeeds.front());
    const auto ckpt = align::to_checkpoint(r.two_stage.model);
    check(model::deserialize_checkpoint(model::serialize_checkpoint(ckpt)) == ckpt, "trained checkpoint");
    Matrix x = r.emb.train_photo;
    linalg::round_to_f32(x);  // the payload an embedding file carries
    codec::OpqParams op;
    op.m = 8;
    op.k = 16;
    op.outer_iters = 2;
    op.rotated_dim = 72;
    const std::vector<codec::AnyCodec> codecs{codec::pq_train(x, {8, 16, 10, 1}), codec::opq_train(x, op),
                                              codec::scalar_quantize_fit(x), codec::pca_codec_fit(x, 40)};
    for (const auto& c : codecs) {
        const std::string kind = std::to_string(static_cast<int>(codec::kind_of(c)));
        const auto bytes = codec::serialize_codec(c);
        const auto back = codec::deserialize_codec(bytes);
        check(codec::serialize_codec(back) == bytes, "codec kind " + kind);
        const auto codes = codec::encode(c, x);
        check(codec::encode(back, x) == codes, "reloaded codec kind " + kind);
        check(codec::deserialize_embedding_file(codec::serialize_codes(codes)).codes == codes, "codes kind " + kind);
    }
    check(codec::deserialize_embedding_file(codec::serialize_embeddings(x)).floats == x, "embeddings");
    for (const char* f : {"eval/photo.blemb", "codes/codes.blemb", "data/photos.blemb"}) {
        const auto& bytes = a.at(f);
        const auto file = codec::deserialize_embedding_file(bytes);
        const auto again = file.dtype == codec::EmbeddingDtype::kF32 ? codec::serialize_embeddings(file.floats)
                                                                     : codec::serialize_codes(file.codes);
        check(again == bytes, f);
    }
    const auto& codec_bytes = a.at("codes/codec.blcodec");
    check(codec::serialize_codec(codec::deserialize_codec(codec_bytes)) == codec_bytes, "codec file");
    const bool trips = inexact.empty();
    std::string which;
    for (const auto& w : inexact) which += " " + w;
    fs::remove_all(base);
    return {same && trips, std::to_string(a.size()) + " pipeline artifacts compared" +
                               (same ? " byte-identical" : ", differing:" + diff) +
                               "; checkpoint/codec/embedding round trips " + (trips ? "bit-exact" : "NOT exact:" + which)};
}

// -- 10 -----------------------------------------------------------------------------

Outcome masking_and_order() {
    const auto& r = run_for(kSeeds.front());
    const auto& enc = r.two_stage.model.photo_set;
    bool padded_exact = true;
    double min_order = 1e9;
    double max_meanpool = 0.0;

    auto ablation_cfg = enc.config;
    ablation_cfg.pooling = model::Pooling::kMean;
    ablation_cfg.positional = false;
    const auto ablation = model::init_set_encoder(ablation_cfg, 99);

    auto l2 = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 100.0);
    for (const auto& rec : r.data.holdout) {
        const std::size_t c = rec.photo_count;
        Matrix junk = rec.photos;
        for (std::size_t row = c; row < junk.rows(); ++row)
            for (double& v : junk.row(row)) v = noise(rng);
        if (model::encode_photoset(enc, rec.photos, c) != model::encode_photoset(enc, junk, c)) padded_exact = false;

        if (c < 2) continue;
        Matrix reversed = rec.photos;
        for (std::size_t row = 0; row < c; ++row)
            std::copy(rec.photos.row(c - 1 - row).begin(), rec.photos.row(c - 1 - row).end(), reversed.row(row).begin());
        min_order = std::min(min_order, l2(model::encode_photoset(enc, rec.photos, c),
                                           model::encode_photoset(enc, reversed, c)));
        max_meanpool = std::max(max_meanpool, l2(model::encode_photoset(ablation, rec.photos, c),
                                                 model::encode_photoset(ablation, reversed, c)));
    }
    return {padded_exact && min_order > kOrderSensitivity && max_meanpool < kMeanPoolInvariance,
            std::string("padding ") + (padded_exact ? "bit-exact" : "NOT exact") + " over " +
                std::to_string(r.data.holdout.size()) + " sets; min reorder L2 " + std::to_string(min_order) +
                "; max mean-pool reorder L2 " + std::to_string(max_meanpool)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness", gradient_correctness},
        {"alignment recovery", alignment_recovery},
        {"coarse-then-fine benefit", coarse_then_fine},
        {"OPQ vs PQ", opq_vs_pq},
        {"quantization fidelity", quantization_fidelity},
        {"PCA diminishing returns", diminishing_returns},
        {"metric exactness", metric_exactness},
        {"code layout", code_layout},
        {"determinism and persistence", determinism_and_persistence},
        {"masking and order sensitivity", masking_and_order},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
