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

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "listalign/eval.hpp"
#include "listalign/model.hpp"

namespace listalign::align {

using linalg::Matrix;
using model::Tape;
using model::Var;

enum class LossKind { kInfoNce, kSigLip };

std::string to_string(LossKind kind);
/// Accepts "infonce" or "siglip"; anything else is a ConfigError.
LossKind parse_loss_kind(std::string_view name);

/// The logit scale is exp(log_scale), which keeps the temperature positive.
/// InfoNCE starts at 1/temperature = 14; SigLIP starts at scale 10, bias -10.
struct LossConfig {
    LossKind kind = LossKind::kInfoNce;

    bool operator==(const LossConfig&) const = default;
};

/// "log_scale" (1×1) always, plus "bias" (1×1) for SigLIP.
model::ParameterSet init_loss_params(const LossConfig& cfg);

/// Symmetric cross-entropy with diagonal targets on logits / temperature.
double infonce_loss(const Matrix& logits, double temperature);
/// Mean over all pairs of log(1 + exp(-z (scale·logit + bias))), z = +1 on
/// the diagonal and -1 elsewhere.
double siglip_loss(const Matrix& logits, double scale, double bias);

/// Loss value and its partial derivatives.
struct LossGradient {
    double loss = 0.0;
    Matrix d_logits;
    double d_log_scale = 0.0;
    double d_bias = 0.0;
};

LossGradient infonce_gradient(const Matrix& logits, double log_scale);
LossGradient siglip_gradient(const Matrix& logits, double log_scale, double bias);

namespace ops {
Var infonce(Tape& t, Var logits, Var log_scale);
Var siglip(Tape& t, Var logits, Var log_scale, Var bias);
}  // namespace ops

/// Applies the configured loss to raw logits. `loss_vars` binds the loss
/// parameters in init_loss_params order.
Var loss_on_tape(Tape& t, const LossConfig& cfg, Var logits, const model::Bound& loss_vars);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::size_t steps = 0;  ///< updates taken; drives bias correction

    bool operator==(const AdamState&) const = default;
};

AdamState init_adam_state(const model::ParameterSet& params);

/// AdamW with bias correction. Decay is decoupled and applies only to params
/// flagged for it. Frozen params and their moments are left untouched. Params
/// are stored at f32 precision after the update.
void adam_step(model::ParameterSet& params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& cfg, double lr);

/// base × min(1, step / warmup) × ½(1 + cos(π · min(step, horizon) / horizon)).
double learning_rate(double base, std::size_t step, std::size_t warmup, std::size_t horizon);

// ---------------------------------------------------------------------------
// Training

struct Stage {
    std::size_t epochs = 1;
    double learning_rate = 1e-3;
    std::vector<std::size_t> unfrozen_text_layers;  ///< empty: text tower frozen

    bool operator==(const Stage&) const = default;
};

struct TrainSchedule {
    std::vector<Stage> stages;
    AdamConfig adam;
    std::size_t warmup_steps = 100;
    std::size_t horizon_steps = 0;  ///< 0: the stage's own step count
    std::size_t batch_size = 64;
    std::size_t accumulation = 1;   ///< micro-batches summed per optimizer step
    std::size_t eval_every = 1;     ///< epochs between holdout evaluations; 0: final epoch only
    std::vector<std::size_t> recall_ks{1, 5, 10};
    std::uint64_t seed = 0;

    bool operator==(const TrainSchedule&) const = default;
};

/// Throws ConfigError on an inconsistent schedule.
void validate(const TrainSchedule& schedule, const model::TextEncoderParams& text,
              std::size_t train_size);

struct StepRecord {
    std::size_t step = 0;
    std::size_t stage = 0;
    std::size_t epoch = 0;
    double loss = 0.0;
    double learning_rate = 0.0;
    double grad_norm_photo = 0.0;
    double grad_norm_text = 0.0;
    double logit_scale = 0.0;

    bool operator==(const StepRecord&) const = default;
};

struct EpochRecord {
    std::size_t stage = 0;
    std::size_t epoch = 0;  ///< counted across stages, from 1
    double mean_loss = 0.0;
    bool evaluated = false;
    eval::RetrievalMetrics holdout;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;

    bool operator==(const TrainLog&) const = default;
};

/// One JSON object per line: steps first, then epoch summaries.
std::string to_jsonl(const TrainLog& log);
std::string epochs_csv(const TrainLog& log);

struct Model {
    model::SetEncoderParams photo_set;
    model::TextEncoderParams text;
    LossConfig loss;
    model::ParameterSet loss_params;

    bool operator==(const Model&) const = default;
};

struct TrainResult {
    Model model;
    TrainLog log;
};

/// Each stage freezes the text tower except its listed layers, reshuffles
/// the training set every epoch and drops the last partial batch. The
/// learning-rate schedule restarts at every stage.
TrainResult train(std::span<const synth::ListingRecord> train_set,
                  std::span<const synth::ListingRecord> holdout, Model init,
                  const TrainSchedule& schedule);

/// Holdout retrieval with text rows as queries.
eval::RetrievalMetrics evaluate(const Model& m, std::span<const synth::ListingRecord> records,
                                std::span<const std::size_t> ks);

model::Checkpoint to_checkpoint(const Model& m);
Model from_checkpoint(const model::Checkpoint& c);

}  // namespace listalign::align
