#include <benchmark/benchmark.h>

#include "ecoperceiver/model.hpp"
#include "ecoperceiver/trainer.hpp"

using namespace ecp;

namespace {

WindowBatch random_batch(Rng& rng, int64_t batch, int64_t t_len, const VariableCatalog& catalog) {
    std::vector<ObservationWindow> ws;
    const int64_t v_tab = catalog.tabular_count();
    const int64_t v_band = catalog.band_count();
    const int64_t v_total = v_tab + v_band;
    for (int64_t b = 0; b < batch; ++b) {
        ObservationWindow w;
        w.t_len = t_len;
        w.v_tab = v_tab;
        w.v_band = v_band;
        w.values.assign(static_cast<size_t>(t_len * v_tab), 0.0);
        w.value_present.assign(static_cast<size_t>(t_len * v_tab), 1);
        w.band_pixels.assign(static_cast<size_t>(t_len * v_band * kBandPixels), 0.0);
        w.pixel_present.assign(static_cast<size_t>(t_len * v_band * kBandPixels), 1);
        w.mask = BoolTensor(Shape{t_len, v_total}, 1);
        for (auto& v : w.values) v = rng.uniform(-0.5, 0.5);
        for (auto& v : w.band_pixels) v = rng.uniform(-0.5, 0.5);
        w.target = rng.uniform(-10, 10);
        ws.push_back(std::move(w));
    }
    return pack_windows(ws);
}

ModelConfig desk_cfg() {
    ModelConfig cfg;
    cfg.latent_width = 32;
    cfg.attn_width = 32;
    cfg.n_heads = 4;
    cfg.wca_blocks = 4;
    cfg.csa_blocks = 2;
    cfg.context_window = 16;
    cfg.dropout_p = 0.0;
    return cfg;
}

}  // namespace

static void BM_ForwardEval(benchmark::State& state) {
    set_num_threads(static_cast<int>(state.range(0)));
    const auto cfg = desk_cfg();
    const auto catalog = default_catalog();
    Model<float> model(cfg, catalog, 0);
    Rng rng(5);
    auto batch = random_batch(rng, 256, cfg.context_window, catalog);
    Tape<float> tape;
    tape.recording = false;
    for (auto _ : state) {
        auto out = model.forward(tape, batch, Mode::Eval);
        benchmark::DoNotOptimize(out.predictions.data());
    }
    set_num_threads(1);
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ForwardEval)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
    set_num_threads(static_cast<int>(state.range(0)));
    const auto cfg = desk_cfg();
    const auto catalog = default_catalog();
    Model<float> model(cfg, catalog, 0);
    TrainConfig tc;
    AdamW opt(model.params(), tc);
    Rng rng(5);
    auto batch = random_batch(rng, 256, cfg.context_window, catalog);
    auto target = Tensor<float>::zeros({batch.batch});
    for (int64_t i = 0; i < batch.batch; ++i)
        target.data()[i] = static_cast<float>(batch.targets[static_cast<size_t>(i)]);
    for (auto _ : state) {
        Tape<float> tape;
        auto out = model.forward(tape, batch, Mode::Eval);
        auto loss = mse_loss(tape, out.predictions, target);
        opt.zero_grad();
        tape.backward(loss);
        opt.step(1e-4);
    }
    set_num_threads(1);
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
