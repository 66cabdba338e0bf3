#include <benchmark/benchmark.h>

#include <random>

#include "tsccn/engine.hpp"
#include "tsccn/maskrepair.hpp"
#include "tsccn/metrics.hpp"
#include "tsccn/nn/adam.hpp"
#include "tsccn/synthgen.hpp"

namespace {

using namespace tsccn;

engine::TripletDataset small_dataset(int side) {
    synth::SynthConfig sc;
    sc.n_patients = 4;
    sc.patch_side = side;
    sc.class_ratio = {0.5, 0.25, 0.25};
    return engine::TripletDataset::from_sequences(synth::generate(sc).sequences, side);
}

void BM_Conv3x3(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    nn::Rng rng(1);
    nn::Conv2d conv(c, c, 3, 1, 1, rng);
    nn::Tensor x({32, c, 32, 32}, 0.5f);
    nn::NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(conv.forward(nn::Var(x)).value().data());
}
BENCHMARK(BM_Conv3x3)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const auto ablation = static_cast<net::Ablation>(state.range(0));
    const int batch = static_cast<int>(state.range(1));
    const auto ds = small_dataset(32);
    net::TsccnModel model(net::compact_config(ablation), 3);
    std::vector<nn::Var> params;
    for (auto& [name, p] : model.named_parameters()) params.push_back(p);
    nn::Adam adam(params, {1e-3});
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i % ds.size();
    const auto b = engine::make_batch(ds, idx);
    for (auto _ : state) {
        auto out = model.forward(nn::Var(b.x_p), nn::Var(b.x_c), nn::Var(b.x_n), nn::Mode::Train);
        engine::compute_losses(out, b, model.flags(), loss::LossWeights{}, true);
        adam.step();
        adam.zero_grad();
    }
    state.SetItemsProcessed(state.iterations() * batch);
    state.SetLabel(std::string(net::to_string(ablation)));
}
BENCHMARK(BM_TrainStep)
    ->Args({static_cast<int>(net::Ablation::SingleStream), 32})
    ->Args({static_cast<int>(net::Ablation::FullTsccn), 32})
    ->Unit(benchmark::kMillisecond);

void BM_MacroMetrics(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    metrics::ConfusionState st;
    for (int i = 0; i < state.range(0); ++i) {
        const std::array<double, 3> s = {u(rng), u(rng), u(rng)};
        metrics::accumulate(st, i % 3, static_cast<int>(rng() % 3), s);
    }
    for (auto _ : state) benchmark::DoNotOptimize(metrics::macro_metrics(st).aAUC);
}
BENCHMARK(BM_MacroMetrics)->Arg(1000)->Arg(10000);

void BM_MaskRepair(benchmark::State& state) {
    synth::SynthConfig sc;
    sc.n_patients = 1;
    sc.slices_per_patient = 1;
    sc.vertebrae_per_slice = 10;
    synth::MaskCorruption corruption;
    corruption.deleted = {3};
    corruption.shrunk = {6};
    const auto fixtures = synth::generate_masks(sc, corruption);
    for (auto _ : state) benchmark::DoNotOptimize(repair::repair(fixtures.front().mask).repaired.components.size());
}
BENCHMARK(BM_MaskRepair)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
