#include <benchmark/benchmark.h>

#include "ecoperceiver/rng.hpp"
#include "ecoperceiver/tensor.hpp"

using namespace ecp;

namespace {

Tensor<float> random_f32(Rng& rng, Shape shape, bool rg = false) {
    auto t = Tensor<float>::zeros(std::move(shape), rg);
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    return t;
}

}  // namespace

static void BM_MatmulForward(benchmark::State& state) {
    const int64_t rows = state.range(0);
    Rng rng(1);
    auto a = random_f32(rng, {rows, 40});
    auto w = random_f32(rng, {40, 128});
    Tape<float> tape;
    tape.recording = false;
    for (auto _ : state) {
        auto out = matmul(tape, a, w);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * rows * 40 * 128);
}
BENCHMARK(BM_MatmulForward)->Arg(4096)->Arg(65536);

static void BM_MatmulTrainStep(benchmark::State& state) {
    const int64_t rows = state.range(0);
    Rng rng(1);
    auto a = random_f32(rng, {rows, 40}, true);
    auto w = random_f32(rng, {40, 128}, true);
    for (auto _ : state) {
        Tape<float> tape;
        auto loss = sum_all(tape, matmul(tape, a, w));
        tape.backward(loss);
        a.zero_grad();
        w.zero_grad();
    }
    state.SetItemsProcessed(state.iterations() * rows * 40 * 128 * 3);
}
BENCHMARK(BM_MatmulTrainStep)->Arg(4096)->Arg(65536);

static void BM_MaskedSoftmax(benchmark::State& state) {
    Rng rng(2);
    auto x = random_f32(rng, {4096, 30});
    BoolTensor mask({4096, 30}, 1);
    for (auto& b : mask.v) b = rng.uniform01() < 0.7;
    Tape<float> tape;
    tape.recording = false;
    for (auto _ : state) {
        auto y = softmax_masked(tape, x, &mask);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_MaskedSoftmax);

static void BM_LayerNorm(benchmark::State& state) {
    Rng rng(3);
    auto x = random_f32(rng, {8192, 128});
    auto gamma = Tensor<float>::full({128}, 1.0f);
    auto beta = Tensor<float>::zeros({128});
    Tape<float> tape;
    tape.recording = false;
    for (auto _ : state) {
        auto y = layer_norm(tape, x, gamma, beta);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_LayerNorm);

BENCHMARK_MAIN();
