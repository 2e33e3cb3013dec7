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

#include <benchmark/benchmark.h>

#include "listalign/align.hpp"
#include "listalign/synth.hpp"

namespace {

using namespace listalign;

synth::GeneratorConfig desk_generator() {
    synth::GeneratorConfig g;
    g.n_listings = 256;
    g.max_photos = 8;
    g.min_photos = 5;
    g.seed = 1;
    return g;
}

model::SetEncoderConfig desk_encoder() {
    model::SetEncoderConfig c;
    c.input_dim = 16;
    c.d_model = 32;
    c.heads = 4;
    c.layers = 2;
    c.d_out = 64;
    c.max_photos = 8;
    return c;
}

void BM_EncodePhotoSets(benchmark::State& state) {
    const auto records = synth::generate(desk_generator());
    const auto params = model::init_set_encoder(desk_encoder(), 2);
    for (auto _ : state) benchmark::DoNotOptimize(model::encode_photosets(params, records));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(records.size()));
}
BENCHMARK(BM_EncodePhotoSets)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const auto records = synth::generate(desk_generator());
    std::vector<const synth::ListingRecord*> batch;
    for (std::size_t i = 0; i < 64; ++i) batch.push_back(&records[i]);
    auto ps = model::init_set_encoder(desk_encoder(), 3);
    model::TextEncoderConfig tc;
    tc.hidden = {64, 64};
    const auto te = model::init_text_encoder(tc, 4);
    const align::LossConfig loss;
    const auto loss_params = align::init_loss_params(loss);
    auto adam = align::init_adam_state(ps.params);
    for (auto _ : state) {
        auto fw = model::forward_batch(ps, te, batch, true);
        const auto lb = model::bind(fw.tape, loss_params);
        const auto l = align::loss_on_tape(fw.tape, loss, fw.logits, lb);
        const auto g = model::backward(fw, l, ps, te);
        align::adam_step(ps.params, g.photo_set, adam, {}, 1e-4);
    }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
