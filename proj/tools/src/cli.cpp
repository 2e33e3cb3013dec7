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

#include "listalign/cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "listalign/align.hpp"
#include "listalign/cli/config.hpp"
#include "listalign/codec_io.hpp"
#include "listalign/error.hpp"
#include "listalign/eval.hpp"
#include "listalign/io.hpp"

namespace listalign::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using linalg::Matrix;

constexpr std::uint64_t kCodecSeedStream = 5;

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

struct Context {
    Globals globals;
    std::ostream& out;
    std::ostream& err;

    PipelineConfig config() const {
        PipelineConfig cfg;
        if (!globals.config_path.empty()) {
            cfg = load_config(globals.config_path);
        } else {
            cfg = parse_config("{\"schema_version\": 1}");
        }
        if (globals.seed) apply_seed(cfg, *globals.seed);
        return cfg;
    }
    fs::path out_dir() const {
        if (globals.out.empty()) throw ConfigError("--out is required");
        return globals.out;
    }
    std::ostream& say() const { return globals.quiet ? null_stream() : out; }

    static std::ostream& null_stream() {
        static std::ostream sink(nullptr);
        return sink;
    }
};

std::string fixed(double v, int digits = 4) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

std::string metrics_line(const eval::RetrievalMetrics& m) {
    std::ostringstream s;
    s << "MR t2i " << fixed(m.mean_rank_t2i, 3) << " | MR i2t " << fixed(m.mean_rank_i2t, 3);
    for (const auto& [k, v] : m.recall_t2i) s << " | R@" << k << " t2i " << fixed(v);
    for (const auto& [k, v] : m.recall_i2t) s << " | R@" << k << " i2t " << fixed(v);
    return s.str();
}

// Model whose input widths follow the dataset rather than the config.
align::Model initial_model(const PipelineConfig& cfg, const synth::GeneratorConfig& data) {
    auto se = cfg.set_encoder;
    se.input_dim = data.photo_dim;
    se.max_photos = data.max_photos;
    auto te = cfg.text_encoder;
    te.input_dim = data.text_dim;
    te.d_out = se.d_out;
    align::Model m;
    m.photo_set = model::init_set_encoder(se, set_encoder_seed(cfg));
    m.text = model::init_text_encoder(te, text_encoder_seed(cfg));
    m.loss = cfg.loss;
    m.loss_params = align::init_loss_params(cfg.loss);
    return m;
}

std::vector<synth::ListingRecord> all_records(const synth::Dataset& ds) {
    std::vector<synth::ListingRecord> all = ds.train;
    all.insert(all.end(), ds.holdout.begin(), ds.holdout.end());
    return all;
}

// ---------------------------------------------------------------------------

int cmd_gen(const Context& ctx) {
    const auto cfg = ctx.config();
    const auto dir = ctx.out_dir();
    const auto ds = synth::build_dataset(cfg.generator, cfg.filters, cfg.holdout_fraction);
    synth::save_dataset(dir, ds);
    const auto& st = ds.stats;
    ctx.say() << "gen: kept " << st.kept << " of " << st.input << " listings (dropped: photos "
              << st.dropped_photos << ", text " << st.dropped_text << ", alignment "
              << st.dropped_alignment << "); train " << ds.train.size() << ", holdout "
              << ds.holdout.size() << "\n";
    return kOk;
}

int cmd_train(const Context& ctx, const std::string& data_dir) {
    const auto cfg = ctx.config();
    const auto dir = ctx.out_dir();
    const auto ds = synth::load_dataset(data_dir);
    const auto init = initial_model(cfg, ds.generator);
    const auto result = align::train(ds.train, ds.holdout, init, cfg.train);

    fs::create_directories(dir);
    model::save_checkpoint(dir / "model.blmodel", align::to_checkpoint(result.model));
    io::write_file_atomic(dir / "train_log.jsonl", align::to_jsonl(result.log));
    io::write_file_atomic(dir / "epochs.csv", align::epochs_csv(result.log));
    io::write_file_atomic(dir / "config.json", to_json(cfg));

    ctx.say() << "train: " << result.log.steps.size() << " optimizer steps over "
              << result.log.epochs.size() << " epochs\n";
    if (!result.log.epochs.empty() && result.log.epochs.back().evaluated)
        ctx.say() << "train: holdout " << metrics_line(result.log.epochs.back().holdout) << "\n";
    return kOk;
}

struct QuantizeOptions {
    std::string input;
    std::string kind;
    std::optional<std::size_t> m, k, rotated_dim, outer_iters, pca_dim;
    std::string codec_in;
    std::string decoded_out;
};

codec::AnyCodec train_codec(const PipelineConfig& cfg, const QuantizeOptions& o, const Matrix& x) {
    auto s = cfg.codec;
    if (!o.kind.empty()) s.kind = o.kind;
    if (o.m) s.m = *o.m;
    if (o.k) s.k = *o.k;
    if (o.rotated_dim) s.rotated_dim = *o.rotated_dim;
    if (o.outer_iters) s.outer_iters = *o.outer_iters;
    if (o.pca_dim) s.pca_dim = *o.pca_dim;
    const std::uint64_t seed = linalg::derive_seed(cfg.seed, kCodecSeedStream);
    if (s.kind == "pq") return codec::pq_train(x, {s.m, s.k, s.iters, seed});
    if (s.kind == "opq") {
        codec::OpqParams p;
        p.m = s.m;
        p.k = s.k;
        p.rotated_dim = s.rotated_dim;
        p.outer_iters = s.outer_iters;
        p.init_iters = s.iters;
        p.inner_iters = s.inner_iters;
        p.seed = seed;
        return codec::opq_train(x, p);
    }
    if (s.kind == "scalar") return codec::scalar_quantize_fit(x);
    if (s.kind == "pca") return codec::pca_codec_fit(x, s.pca_dim);
    throw ConfigError("unknown codec kind \"" + s.kind + "\" (expected pq, opq, scalar or pca)");
}

int cmd_quantize(const Context& ctx, const QuantizeOptions& o) {
    const auto cfg = ctx.config();
    const auto dir = ctx.out_dir();
    const Matrix x = codec::load_embeddings(o.input);
    codec::AnyCodec c = o.codec_in.empty() ? train_codec(cfg, o, x) : codec::load_codec(o.codec_in);
    if (codec::input_dim(c) != x.cols())
        throw ShapeMismatch("codec expects " + std::to_string(codec::input_dim(c)) +
                            "-d vectors, input has " + std::to_string(x.cols()));
    const auto codes = codec::encode(c, x);
    const Matrix decoded = codec::decode(c, codes);

    fs::create_directories(dir);
    if (o.codec_in.empty()) codec::save_codec(dir / "codec.blcodec", c);
    codec::save_codes(dir / "codes.blemb", codes);
    if (!o.decoded_out.empty()) codec::save_embeddings(o.decoded_out, decoded);

    const auto report = codec::compression_report(x, decoded);
    auto& s = ctx.say();
    s << "quantize: " << codes.n << " vectors, " << codes.bytes_per_vector << " bytes/vector\n";
    s << "percentile";
    for (double p : codec::kReportPercentiles) s << "\tp" << static_cast<int>(std::lround(p * 100));
    s << "\tmean\n";
    s << "l2";
    for (double v : report.l2) s << '\t' << fixed(v, 6);
    s << '\t' << fixed(report.mean_l2, 6) << "\n";
    s << "relative_l2";
    for (double v : report.relative_l2) s << '\t' << fixed(v, 6);
    s << '\t' << fixed(report.mean_relative_l2, 6) << "\n";
    return kOk;
}

int cmd_eval(const Context& ctx, const std::string& model_path, const std::string& data_dir) {
    const auto cfg = ctx.config();
    const auto dir = ctx.out_dir();
    const auto m = align::from_checkpoint(model::load_checkpoint(model_path));
    const auto ds = synth::load_dataset(data_dir);

    const Matrix train_photo = model::encode_photosets(m.photo_set, ds.train);
    const Matrix train_text = model::encode_texts(m.text, synth::text_feature_matrix(ds.train));
    const Matrix hold_photo = model::encode_photosets(m.photo_set, ds.holdout);
    const Matrix hold_text = model::encode_texts(m.text, synth::text_feature_matrix(ds.holdout));

    eval::EvalReport report;
    report.holdout = eval::retrieval_metrics(hold_text, hold_photo, cfg.eval.recall_ks);
    report.probes = eval::probe_attributes(train_photo, ds.train, hold_photo, ds.holdout, cfg.eval.probe_k);
    if (!cfg.eval.sweep_dims.empty()) {
        const eval::SweepInput in{&train_photo, &train_text, &hold_photo, &hold_text};
        report.sweep = eval::pca_dim_sweep(in, cfg.eval.sweep_dims, false, cfg.eval.recall_ks);
        if (cfg.eval.sweep_quantize) {
            auto q = eval::pca_dim_sweep(in, cfg.eval.sweep_dims, true, cfg.eval.recall_ks);
            report.sweep.insert(report.sweep.end(), q.begin(), q.end());
        }
    }

    fs::create_directories(dir);
    io::write_file_atomic(dir / "eval_report.json", eval::to_json(report) + "\n");
    if (!report.sweep.empty()) io::write_file_atomic(dir / "sweep.csv", eval::sweep_csv(report.sweep));
    const auto records = all_records(ds);
    codec::save_embeddings(dir / "photo.blemb", model::encode_photosets(m.photo_set, records));
    codec::save_embeddings(dir / "text.blemb",
                           model::encode_texts(m.text, synth::text_feature_matrix(records)));

    ctx.say() << "eval: holdout " << metrics_line(report.holdout) << "\n";
    for (const auto& [name, acc] : report.probes)
        ctx.say() << "eval: probe " << name << " accuracy " << fixed(acc) << "\n";
    return kOk;
}

struct SearchOptions {
    std::string model_path;
    std::string data_dir;
    std::string gallery;
    std::optional<std::int64_t> query_id;
    std::string query_vector;
    std::string modality = "photo";
    std::size_t k = 10;
};

int cmd_search(const Context& ctx, const SearchOptions& o) {
    if (o.modality != "photo" && o.modality != "text" && o.modality != "multimodal")
        throw ConfigError("--modality must be photo, text or multimodal");
    if (o.query_id.has_value() == !o.query_vector.empty())
        throw ConfigError("exactly one of --query-id and --query-vector is required");

    Matrix gallery;
    std::vector<std::int64_t> ids;
    if (!o.gallery.empty()) {
        gallery = codec::load_embeddings(o.gallery);
        ids.resize(gallery.rows());
        std::iota(ids.begin(), ids.end(), std::int64_t{0});
    } else {
        if (o.model_path.empty() || o.data_dir.empty())
            throw ConfigError("search needs --gallery, or --model with --data");
        const auto m = align::from_checkpoint(model::load_checkpoint(o.model_path));
        auto records = all_records(synth::load_dataset(o.data_dir));
        std::sort(records.begin(), records.end(),
                  [](const auto& a, const auto& b) { return a.id < b.id; });
        for (const auto& r : records) ids.push_back(r.id);
        const Matrix photo = model::encode_photosets(m.photo_set, records);
        const Matrix text = model::encode_texts(m.text, synth::text_feature_matrix(records));
        if (o.modality == "photo") gallery = photo;
        else if (o.modality == "text") gallery = text;
        else gallery = linalg::normalize_rows(linalg::add(photo, text));
    }

    std::vector<double> query;
    if (o.query_id) {
        const auto it = std::find(ids.begin(), ids.end(), *o.query_id);
        if (it == ids.end()) throw UnknownId("listing id " + std::to_string(*o.query_id) + " not found");
        const auto row = gallery.row(static_cast<std::size_t>(it - ids.begin()));
        query.assign(row.begin(), row.end());
    } else {
        const Matrix q = codec::load_embeddings(o.query_vector);
        if (q.rows() != 1 || q.cols() != gallery.cols())
            throw ShapeMismatch("query vector file must hold one " + std::to_string(gallery.cols()) +
                                "-d vector");
        query.assign(q.row(0).begin(), q.row(0).end());
    }

    const Matrix g = linalg::normalize_rows(gallery);
    const Matrix qn = linalg::normalize_rows(Matrix::row_vector(query));
    std::vector<std::pair<double, std::int64_t>> scored;
    for (std::size_t i = 0; i < g.rows(); ++i) scored.emplace_back(linalg::dot(qn.row(0), g.row(i)), ids[i]);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const std::size_t k = std::min(o.k, scored.size());
    ctx.out << "rank\tid\tscore\n";
    for (std::size_t r = 0; r < k; ++r)
        ctx.out << (r + 1) << '\t' << scored[r].second << '\t' << fixed(scored[r].first, 6) << "\n";
    return kOk;
}

// JSON objects order keys as strings; recall tables read better by K.
std::vector<std::string> numeric_keys(const json& obj) {
    std::vector<std::string> keys;
    for (const auto& [k, v] : obj.items()) keys.push_back(k);
    std::sort(keys.begin(), keys.end(), [](const std::string& a, const std::string& b) {
        return std::stoul(a) < std::stoul(b);
    });
    return keys;
}

int cmd_report(const Context& ctx, const std::string& eval_path, const std::string& log_path) {
    std::ostringstream s;
    const json rep = json::parse(io::read_file(eval_path));
    const auto& h = rep.at("holdout");
    s << "Holdout retrieval (" << h.at("n_queries").get<std::size_t>() << " queries)\n";
    s << "metric\ttext->image\timage->text\n";
    s << "mean rank\t" << fixed(h.at("mean_rank_t2i").get<double>(), 3) << '\t'
      << fixed(h.at("mean_rank_i2t").get<double>(), 3) << "\n";
    for (const auto& k : numeric_keys(h.at("recall_t2i")))
        s << "recall@" << k << '\t' << fixed(h.at("recall_t2i").at(k).get<double>()) << '\t'
          << fixed(h.at("recall_i2t").at(k).get<double>()) << "\n";
    if (!rep.at("probes").empty()) {
        s << "\nAttribute probes (k-NN accuracy)\n";
        for (const auto& [name, acc] : rep.at("probes").items())
            s << name << '\t' << fixed(acc.get<double>()) << "\n";
    }
    if (!rep.at("sweep").empty()) {
        s << "\nPCA sweep\ndim\t8-bit\tmean rank t2i\trecall@k t2i\n";
        for (const auto& row : rep.at("sweep")) {
            s << row.at("dim").get<std::size_t>() << '\t' << (row.at("quantized").get<bool>() ? "yes" : "no")
              << '\t' << fixed(row.at("mean_rank_t2i").get<double>(), 3);
            for (const auto& k : numeric_keys(row.at("recall_t2i")))
                s << "\t@" << k << ' ' << fixed(row.at("recall_t2i").at(k).get<double>());
            s << "\n";
        }
    }
    if (!log_path.empty()) {
        std::istringstream lines(io::read_file(log_path));
        std::string line, last_epoch;
        std::size_t steps = 0;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            if (j.at("type") == "step") ++steps;
            else last_epoch = line;
        }
        s << "\nTraining: " << steps << " optimizer steps";
        if (!last_epoch.empty())
            s << ", final mean loss " << fixed(json::parse(last_epoch).at("mean_loss").get<double>());
        s << "\n";
    }
    ctx.out << s.str();
    if (!ctx.globals.out.empty()) {
        fs::create_directories(ctx.globals.out);
        io::write_file_atomic(fs::path(ctx.globals.out) / "report.txt", s.str());
    }
    return kOk;
}

// Maps failures to the command's exit code; config problems always exit 2.
template <class F>
int guarded(std::ostream& err, const char* name, int failure_code, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << name << ": config error: " << e.what() << "\n";
        return kConfigFailure;
    } catch (const json::exception& e) {
        err << name << ": malformed input: " << e.what() << "\n";
        return failure_code;
    } catch (const std::exception& e) {
        err << name << ": " << e.what() << "\n";
        return failure_code;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"listalign: listing photo/text alignment and embedding compression"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals globals;
    std::uint64_t seed_value = 0;
    app.add_option("--config", globals.config_path, "Pipeline config (JSON)");
    auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");
    app.add_option("--out", globals.out, "Output directory");
    app.add_flag("--quiet", globals.quiet, "Suppress progress output");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic listing dataset");

    std::string data_dir, model_path;
    auto* train = app.add_subcommand("train", "Train the photo-set encoder against the text tower");
    train->add_option("--data", data_dir, "Dataset directory")->required();

    QuantizeOptions q;
    auto* quantize = app.add_subcommand("quantize", "Fit a codec and encode embeddings");
    quantize->add_option("--in", q.input, "Embedding file (BLEMB001, f32)")->required();
    quantize->add_option("--kind", q.kind, "pq, opq, scalar or pca");
    quantize->add_option("--m", q.m, "Sub-spaces");
    quantize->add_option("--k", q.k, "Centroids per sub-space");
    quantize->add_option("--rotated-dim", q.rotated_dim, "OPQ rotated dimension");
    quantize->add_option("--outer-iters", q.outer_iters, "OPQ outer iterations");
    quantize->add_option("--pca-dim", q.pca_dim, "Kept PCA dimensions");
    quantize->add_option("--codec-in", q.codec_in, "Encode with an existing codec instead of fitting");
    quantize->add_option("--decoded-out", q.decoded_out, "Write decoded vectors here");

    auto* evaluate = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    evaluate->add_option("--model", model_path, "Checkpoint (BLMODEL1)")->required();
    evaluate->add_option("--data", data_dir, "Dataset directory")->required();

    SearchOptions so;
    std::int64_t query_id = 0;
    auto* search = app.add_subcommand("search", "Brute-force cosine top-k search");
    search->add_option("--model", so.model_path, "Checkpoint (BLMODEL1)");
    search->add_option("--data", so.data_dir, "Dataset directory");
    search->add_option("--gallery", so.gallery, "Embedding file to search instead of a model");
    auto* qid = search->add_option("--query-id", query_id, "Listing id to use as the query");
    search->add_option("--query-vector", so.query_vector, "Embedding file holding one query vector");
    search->add_option("--modality", so.modality, "photo, text or multimodal");
    search->add_option("--k", so.k, "Results to return");

    std::string eval_path, log_path;
    auto* report = app.add_subcommand("report", "Summarize an evaluation report");
    report->add_option("--eval", eval_path, "eval_report.json")->required();
    report->add_option("--log", log_path, "train_log.jsonl");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigFailure;
    }
    if (*seed_opt) globals.seed = seed_value;
    if (*qid) so.query_id = query_id;
    const Context ctx{globals, out, err};

    if (*gen) return guarded(err, "gen", kConfigFailure, [&] { return cmd_gen(ctx); });
    if (*train) return guarded(err, "train", kTrainFailure, [&] { return cmd_train(ctx, data_dir); });
    if (*quantize) return guarded(err, "quantize", kCodecFailure, [&] { return cmd_quantize(ctx, q); });
    if (*evaluate)
        return guarded(err, "eval", kEvalFailure, [&] { return cmd_eval(ctx, model_path, data_dir); });
    if (*search) return guarded(err, "search", kSearchFailure, [&] { return cmd_search(ctx, so); });
    return guarded(err, "report", kEvalFailure, [&] { return cmd_report(ctx, eval_path, log_path); });
}

}  // namespace listalign::cli
