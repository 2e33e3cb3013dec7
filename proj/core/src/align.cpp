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

#include "listalign/align.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "listalign/error.hpp"

namespace listalign::align {

namespace {

using json = nlohmann::json;

constexpr double kInfoNceInitScale = 14.0;
constexpr double kSigLipInitScale = 10.0;
constexpr double kSigLipInitBias = -10.0;

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void require_square(const Matrix& logits, std::size_t min_rows, const char* who) {
    if (logits.rows() != logits.cols())
        throw ShapeMismatch(std::string(who) + ": logits must be square, got " +
                            std::to_string(logits.rows()) + "x" + std::to_string(logits.cols()));
    if (logits.rows() < min_rows)
        throw ShapeMismatch(std::string(who) + ": batch of " + std::to_string(logits.rows()) +
                            " is too small");
}

double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }
double sigmoid(double u) {
    return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
}

// Loss and d(loss)/d(scaled logits) for logits multiplied by `scale`.
double infonce_core(const Matrix& logits, double scale, Matrix* d_scaled) {
    const std::size_t n = logits.rows();
    const double inv = 1.0 / static_cast<double>(n);
    Matrix z = linalg::scale(logits, scale);
    double loss = 0.0;
    if (d_scaled) *d_scaled = Matrix(n, n);
    // Rows: photo i against all texts.
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, z(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += std::exp(z(i, j) - mx);
        const double lse = mx + std::log(sum);
        loss += 0.5 * inv * (lse - z(i, i));
        if (d_scaled)
            for (std::size_t j = 0; j < n; ++j)
                (*d_scaled)(i, j) += 0.5 * inv * (std::exp(z(i, j) - lse) - (i == j ? 1.0 : 0.0));
    }
    // Columns: text j against all photo sets.
    for (std::size_t j = 0; j < n; ++j) {
        double mx = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, z(i, j));
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += std::exp(z(i, j) - mx);
        const double lse = mx + std::log(sum);
        loss += 0.5 * inv * (lse - z(j, j));
        if (d_scaled)
            for (std::size_t i = 0; i < n; ++i)
                (*d_scaled)(i, j) += 0.5 * inv * (std::exp(z(i, j) - lse) - (i == j ? 1.0 : 0.0));
    }
    return loss;
}

double siglip_core(const Matrix& logits, double scale, double bias, Matrix* d_scaled) {
    const std::size_t n = logits.rows();
    const double inv = 1.0 / static_cast<double>(n * n);
    double loss = 0.0;
    if (d_scaled) *d_scaled = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double y = i == j ? 1.0 : -1.0;
            const double x = scale * logits(i, j) + bias;
            loss += inv * softplus(-y * x);
            if (d_scaled) (*d_scaled)(i, j) = -y * sigmoid(-y * x) * inv;
        }
    return loss;
}

double sum_product(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
}

double scalar_of(const Tape& t, Var v) {
    const Matrix& m = t.value(v);
    if (m.rows() != 1 || m.cols() != 1) throw ShapeMismatch("loss parameter must be 1x1");
    return m(0, 0);
}

double squared_norm(std::span<const Matrix> grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (double v : g.values()) s += v * v;
    return s;
}

}  // namespace

std::string to_string(LossKind kind) { return kind == LossKind::kInfoNce ? "infonce" : "siglip"; }

LossKind parse_loss_kind(std::string_view name) {
    if (name == "infonce") return LossKind::kInfoNce;
    if (name == "siglip") return LossKind::kSigLip;
    throw ConfigError("unknown loss kind \"" + std::string(name) + "\" (expected infonce or siglip)");
}

model::ParameterSet init_loss_params(const LossConfig& cfg) {
    model::ParameterSet p;
    const double scale = cfg.kind == LossKind::kInfoNce ? kInfoNceInitScale : kSigLipInitScale;
    p.push_back({"log_scale", Matrix(1, 1, f32(std::log(scale))), false, false});
    if (cfg.kind == LossKind::kSigLip) p.push_back({"bias", Matrix(1, 1, kSigLipInitBias), false, false});
    return p;
}

double infonce_loss(const Matrix& logits, double temperature) {
    require_square(logits, 2, "infonce_loss");
    if (!(temperature > 0.0)) throw DegenerateInput("infonce_loss: temperature must be positive");
    return infonce_core(logits, 1.0 / temperature, nullptr);
}

double siglip_loss(const Matrix& logits, double scale, double bias) {
    require_square(logits, 1, "siglip_loss");
    return siglip_core(logits, scale, bias, nullptr);
}

LossGradient infonce_gradient(const Matrix& logits, double log_scale) {
    require_square(logits, 2, "infonce_loss");
    const double a = std::exp(log_scale);
    LossGradient g;
    Matrix dz;
    g.loss = infonce_core(logits, a, &dz);
    g.d_log_scale = a * sum_product(dz, logits);
    g.d_logits = linalg::scale(dz, a);
    return g;
}

LossGradient siglip_gradient(const Matrix& logits, double log_scale, double bias) {
    require_square(logits, 1, "siglip_loss");
    const double a = std::exp(log_scale);
    LossGradient g;
    Matrix dx;
    g.loss = siglip_core(logits, a, bias, &dx);
    g.d_log_scale = a * sum_product(dx, logits);
    g.d_bias = std::accumulate(dx.values().begin(), dx.values().end(), 0.0);
    g.d_logits = linalg::scale(dx, a);
    return g;
}

namespace ops {

Var infonce(Tape& t, Var logits, Var log_scale) {
    auto g = std::make_shared<LossGradient>(infonce_gradient(t.value(logits), scalar_of(t, log_scale)));
    Matrix value(1, 1, g->loss);
    return t.record(std::move(value), {logits, log_scale}, [logits, log_scale, g](Tape& tp, const Matrix& up) {
        tp.accumulate(logits, linalg::scale(g->d_logits, up(0, 0)));
        tp.accumulate(log_scale, Matrix(1, 1, g->d_log_scale * up(0, 0)));
    });
}

Var siglip(Tape& t, Var logits, Var log_scale, Var bias) {
    auto g = std::make_shared<LossGradient>(
        siglip_gradient(t.value(logits), scalar_of(t, log_scale), scalar_of(t, bias)));
    Matrix value(1, 1, g->loss);
    return t.record(std::move(value), {logits, log_scale, bias},
                    [logits, log_scale, bias, g](Tape& tp, const Matrix& up) {
                        tp.accumulate(logits, linalg::scale(g->d_logits, up(0, 0)));
                        tp.accumulate(log_scale, Matrix(1, 1, g->d_log_scale * up(0, 0)));
                        tp.accumulate(bias, Matrix(1, 1, g->d_bias * up(0, 0)));
                    });
}

}  // namespace ops

Var loss_on_tape(Tape& t, const LossConfig& cfg, Var logits, const model::Bound& loss_vars) {
    const std::size_t expected = cfg.kind == LossKind::kInfoNce ? 1 : 2;
    if (loss_vars.vars.size() != expected)
        throw ShapeMismatch("loss parameters do not match the loss kind");
    return cfg.kind == LossKind::kInfoNce ? ops::infonce(t, logits, loss_vars.vars[0])
                                          : ops::siglip(t, logits, loss_vars.vars[0], loss_vars.vars[1]);
}

// ---------------------------------------------------------------------------

AdamState init_adam_state(const model::ParameterSet& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.value.rows(), p.value.cols());
        s.v.emplace_back(p.value.rows(), p.value.cols());
    }
    return s;
}

void adam_step(model::ParameterSet& params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& cfg, double lr) {
    if (grads.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw ShapeMismatch("adam_step: parameter, gradient and state counts differ");
    ++state.steps;
    const double t = static_cast<double>(state.steps);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (p.frozen) continue;
        const Matrix& g = grads[i];
        if (g.rows() != p.value.rows() || g.cols() != p.value.cols())
            throw ShapeMismatch("adam_step: gradient shape mismatch for " + p.name);
        auto pv = p.value.values();
        auto mv = state.m[i].values();
        auto vv = state.v[i].values();
        const auto gv = g.values();
        const double decay = p.decay ? cfg.weight_decay : 0.0;
        for (std::size_t k = 0; k < pv.size(); ++k) {
            mv[k] = cfg.beta1 * mv[k] + (1.0 - cfg.beta1) * gv[k];
            vv[k] = cfg.beta2 * vv[k] + (1.0 - cfg.beta2) * gv[k] * gv[k];
            const double update = (mv[k] / bc1) / (std::sqrt(vv[k] / bc2) + cfg.eps);
            pv[k] = f32(pv[k] - lr * update - lr * decay * pv[k]);
        }
    }
}

double learning_rate(double base, std::size_t step, std::size_t warmup, std::size_t horizon) {
    const double s = static_cast<double>(step);
    const double warm = warmup == 0 ? 1.0 : std::min(1.0, s / static_cast<double>(warmup));
    const double progress =
        horizon == 0 ? 0.0 : std::min(s, static_cast<double>(horizon)) / static_cast<double>(horizon);
    return base * warm * 0.5 * (1.0 + std::cos(M_PI * progress));
}

// ---------------------------------------------------------------------------

void validate(const TrainSchedule& schedule, const model::TextEncoderParams& text,
              std::size_t train_size) {
    auto fail = [](const std::string& what) { throw ConfigError("train schedule: " + what); };
    if (schedule.batch_size < 2) fail("batch_size must be >= 2");
    if (schedule.accumulation < 1) fail("accumulation must be >= 1");
    const auto& a = schedule.adam;
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0))
        fail("adam betas must lie in [0, 1)");
    if (!(a.eps > 0.0)) fail("adam eps must be positive");
    if (!(a.weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    for (std::size_t k : schedule.recall_ks)
        if (k == 0) fail("recall_ks entries must be >= 1");
    for (std::size_t s = 0; s < schedule.stages.size(); ++s) {
        const auto& st = schedule.stages[s];
        const std::string where = "stage " + std::to_string(s) + ": ";
        if (st.epochs < 1) fail(where + "epochs must be >= 1");
        if (!(st.learning_rate > 0.0)) fail(where + "learning_rate must be positive");
        for (std::size_t l : st.unfrozen_text_layers)
            if (l >= text.layer_count())
                fail(where + "text layer " + std::to_string(l) + " does not exist (tower has " +
                     std::to_string(text.layer_count()) + " layers)");
    }
    if (!schedule.stages.empty() &&
        schedule.batch_size * schedule.accumulation > train_size)
        fail("batch_size x accumulation (" + std::to_string(schedule.batch_size * schedule.accumulation) +
             ") exceeds the training set (" + std::to_string(train_size) + ")");
}

eval::RetrievalMetrics evaluate(const Model& m, std::span<const synth::ListingRecord> records,
                                std::span<const std::size_t> ks) {
    const Matrix photo = model::encode_photosets(m.photo_set, records);
    const Matrix text = model::encode_texts(m.text, synth::text_feature_matrix(records));
    return eval::retrieval_metrics(text, photo, ks);
}

TrainResult train(std::span<const synth::ListingRecord> train_set,
                  std::span<const synth::ListingRecord> holdout, Model init,
                  const TrainSchedule& schedule) {
    validate(schedule, init.text, train_set.size());
    TrainResult result{std::move(init), {}};
    Model& m = result.model;
    std::vector<bool> initial_frozen;
    for (const auto& p : m.text.params) initial_frozen.push_back(p.frozen);

    std::mt19937_64 rng(linalg::derive_seed(schedule.seed, 0x5eed));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const std::size_t per_step = schedule.batch_size * schedule.accumulation;
    const std::size_t steps_per_epoch = train_set.size() / std::max<std::size_t>(per_step, 1);
    std::size_t global_step = 0;
    std::size_t global_epoch = 0;
    std::size_t total_epochs = 0;
    for (const auto& st : schedule.stages) total_epochs += st.epochs;

    std::vector<const synth::ListingRecord*> batch(schedule.batch_size);
    for (std::size_t s = 0; s < schedule.stages.size(); ++s) {
        const Stage& stage = schedule.stages[s];
        m.text.freeze_all(true);
        for (std::size_t l : stage.unfrozen_text_layers) m.text.set_layer_frozen(l, false);
        const bool text_frozen = stage.unfrozen_text_layers.empty();

        const std::size_t horizon =
            schedule.horizon_steps ? schedule.horizon_steps : stage.epochs * steps_per_epoch;
        AdamState photo_state = init_adam_state(m.photo_set.params);
        AdamState text_state = init_adam_state(m.text.params);
        AdamState loss_state = init_adam_state(m.loss_params);
        std::size_t stage_step = 0;

        for (std::size_t e = 0; e < stage.epochs; ++e) {
            ++global_epoch;
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_loss = 0.0;
            for (std::size_t step = 0; step < steps_per_epoch; ++step) {
                std::vector<Matrix> g_photo, g_text, g_loss;
                double step_loss = 0.0;
                for (std::size_t a = 0; a < schedule.accumulation; ++a) {
                    const std::size_t base = (step * schedule.accumulation + a) * schedule.batch_size;
                    for (std::size_t b = 0; b < schedule.batch_size; ++b)
                        batch[b] = &train_set[order[base + b]];
                    auto fw = model::forward_batch(m.photo_set, m.text, batch, text_frozen);
                    const model::Bound lb = model::bind(fw.tape, m.loss_params);
                    const Var loss = loss_on_tape(fw.tape, m.loss, fw.logits, lb);
                    step_loss += fw.tape.value(loss)(0, 0);
                    auto g = model::backward(fw, loss, m.photo_set, m.text);
                    auto gl = model::collect_gradients(fw.tape, m.loss_params, lb);
                    if (a == 0) {
                        g_photo = std::move(g.photo_set);
                        g_text = std::move(g.text);
                        g_loss = std::move(gl);
                    } else {
                        for (std::size_t i = 0; i < g_photo.size(); ++i) g_photo[i] = linalg::add(g_photo[i], g.photo_set[i]);
                        for (std::size_t i = 0; i < g_text.size(); ++i) g_text[i] = linalg::add(g_text[i], g.text[i]);
                        for (std::size_t i = 0; i < g_loss.size(); ++i) g_loss[i] = linalg::add(g_loss[i], gl[i]);
                    }
                }
                const double lr = learning_rate(stage.learning_rate, stage_step, schedule.warmup_steps, horizon);
                adam_step(m.photo_set.params, g_photo, photo_state, schedule.adam, lr);
                adam_step(m.text.params, g_text, text_state, schedule.adam, lr);
                adam_step(m.loss_params, g_loss, loss_state, schedule.adam, lr);

                StepRecord rec;
                rec.step = global_step;
                rec.stage = s;
                rec.epoch = global_epoch;
                rec.loss = step_loss / static_cast<double>(schedule.accumulation);
                rec.learning_rate = lr;
                rec.grad_norm_photo = std::sqrt(squared_norm(g_photo));
                rec.grad_norm_text = std::sqrt(squared_norm(g_text));
                rec.logit_scale = std::exp(m.loss_params[0].value(0, 0));
                result.log.steps.push_back(rec);
                epoch_loss += rec.loss;
                ++global_step;
                ++stage_step;
            }
            EpochRecord er;
            er.stage = s;
            er.epoch = global_epoch;
            er.mean_loss = steps_per_epoch ? epoch_loss / static_cast<double>(steps_per_epoch) : 0.0;
            const bool due = global_epoch == total_epochs ||
                             (schedule.eval_every != 0 && global_epoch % schedule.eval_every == 0);
            if (due && holdout.size() >= 2) {
                er.evaluated = true;
                er.holdout = evaluate(m, holdout, schedule.recall_ks);
            }
            result.log.epochs.push_back(std::move(er));
        }
    }
    for (std::size_t i = 0; i < m.text.params.size(); ++i) m.text.params[i].frozen = initial_frozen[i];
    return result;
}

// ---------------------------------------------------------------------------

namespace {

json metrics_object(const eval::RetrievalMetrics& mt) {
    json rt = json::object(), ri = json::object();
    for (const auto& [k, v] : mt.recall_t2i) rt[std::to_string(k)] = v;
    for (const auto& [k, v] : mt.recall_i2t) ri[std::to_string(k)] = v;
    return {{"mean_rank_t2i", mt.mean_rank_t2i},
            {"mean_rank_i2t", mt.mean_rank_i2t},
            {"recall_t2i", rt},
            {"recall_i2t", ri},
            {"n_queries", mt.n_queries}};
}

}  // namespace

std::string to_jsonl(const TrainLog& log) {
    std::string out;
    for (const auto& s : log.steps) {
        out += json{{"type", "step"},
                    {"step", s.step},
                    {"stage", s.stage},
                    {"epoch", s.epoch},
                    {"loss", s.loss},
                    {"lr", s.learning_rate},
                    {"grad_norm_photo", s.grad_norm_photo},
                    {"grad_norm_text", s.grad_norm_text},
                    {"logit_scale", s.logit_scale}}
                   .dump();
        out += '\n';
    }
    for (const auto& e : log.epochs) {
        json j{{"type", "epoch"}, {"stage", e.stage}, {"epoch", e.epoch}, {"mean_loss", e.mean_loss}};
        if (e.evaluated) j["holdout"] = metrics_object(e.holdout);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string epochs_csv(const TrainLog& log) {
    std::set<std::size_t> ks;
    for (const auto& e : log.epochs)
        for (const auto& [k, v] : e.holdout.recall_t2i) ks.insert(k);
    std::ostringstream out;
    out.precision(10);
    out << "stage,epoch,mean_loss,mean_rank_t2i,mean_rank_i2t";
    for (std::size_t k : ks) out << ",recall_t2i@" << k << ",recall_i2t@" << k;
    out << '\n';
    for (const auto& e : log.epochs) {
        out << e.stage << ',' << e.epoch << ',' << e.mean_loss << ',';
        if (e.evaluated) out << e.holdout.mean_rank_t2i << ',' << e.holdout.mean_rank_i2t;
        else out << ',';
        for (std::size_t k : ks) {
            out << ',';
            if (e.evaluated && e.holdout.recall_t2i.count(k)) out << e.holdout.recall_t2i.at(k);
            out << ',';
            if (e.evaluated && e.holdout.recall_i2t.count(k)) out << e.holdout.recall_i2t.at(k);
        }
        out << '\n';
    }
    return out.str();
}

model::Checkpoint to_checkpoint(const Model& m) {
    return {m.photo_set, m.text, to_string(m.loss.kind), m.loss_params};
}

Model from_checkpoint(const model::Checkpoint& c) {
    Model m;
    m.photo_set = c.photo_set;
    m.text = c.text;
    try {
        m.loss.kind = parse_loss_kind(c.loss_kind);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    m.loss_params = c.loss;
    const auto expected = init_loss_params(m.loss);
    if (m.loss_params.size() != expected.size())
        throw FormatError("checkpoint: loss parameters do not match loss kind");
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (m.loss_params[i].name != expected[i].name || m.loss_params[i].value.rows() != 1 ||
            m.loss_params[i].value.cols() != 1)
            throw FormatError("checkpoint: unexpected loss parameter " + m.loss_params[i].name);
    return m;
}

}  // namespace listalign::align
