// Copyright 2026 The episcen Authors
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

#include "episcen/attention.hpp"
#include "episcen/epiga.hpp"
#include "episcen/experiment.hpp"
#include "episcen/ga.hpp"

namespace episcen {
namespace {

std::vector<TrainingSample> samples(std::size_t n) {
    Rng rng(1);
    std::vector<TrainingSample> out(n);
    for (auto& s : out) {
        for (auto& f : s.features) f = rng.uniform(-1.0, 1.0);
        for (auto& v : s.values) v = rng.uniform();
        s.target = rng.uniform(0.0, 5.0);
    }
    return out;
}

void BM_Episode(benchmark::State& state) {
    const auto id = static_cast<LayoutId>(state.range(0));
    Rng rng(2);
    std::vector<ScenarioGenome> genomes;
    for (int i = 0; i < 64; ++i) genomes.push_back(sample_uniform(rng));
    std::size_t i = 0;
    const SimConfig cfg = SimConfig::stochastic();
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_episode(layout(id), genomes[i % genomes.size()], i, cfg));
        ++i;
    }
}
BENCHMARK(BM_Episode)->DenseRange(0, 3);

void BM_Forward(benchmark::State& state) {
    const ModelParams params = ModelParams::initialize(ModelConfig{}, 3);
    const auto data = samples(32);
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(forward(params, data[i++ % data.size()]));
}
BENCHMARK(BM_Forward);

void BM_LossAndGradient(benchmark::State& state) {
    const ModelParams params = ModelParams::initialize(ModelConfig{}, 4);
    const auto data = samples(static_cast<std::size_t>(state.range(0)));
    const Batch batch = Batch::from(data);
    ParamTensors grads;
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(params, batch, &grads));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGradient)->Arg(16)->Arg(64);

void BM_Nbr(benchmark::State& state) {
    Rng rng(5);
    Cell a, b;
    a.solution = sample_uniform(rng);
    b.solution = sample_uniform(rng);
    a.mask = nucleosome_generation(kGeneCount, 0.2, 1, rng);
    b.mask = nucleosome_generation(kGeneCount, 0.2, 1, rng);
    for (auto _ : state) benchmark::DoNotOptimize(nbr(a, b));
}
BENCHMARK(BM_Nbr);

void BM_GeneSilencing(benchmark::State& state) {
    Rng rng(6);
    Cell c;
    c.solution = sample_uniform(rng);
    c.mask = nucleosome_generation(kGeneCount, 0.5, 1, rng);
    const GsProbabilities probs = GsProbabilities::uniform(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(gene_silencing(c, probs, 0.5, rng));
}
BENCHMARK(BM_GeneSilencing);

void BM_SmallSearch(benchmark::State& state) {
    ExperimentPlan plan;
    plan.budget = 100;
    const auto method = static_cast<Method>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(run_search(method, LayoutId::Env1, 7, plan, nullptr));
}
// Ga and EpiTesterEq; the trained-model variant needs a checkpoint.
BENCHMARK(BM_SmallSearch)->Arg(static_cast<int>(Method::Ga))->Arg(static_cast<int>(Method::EpiTesterEq))->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace episcen

// The packaged benchmark_main archive is LTO-only, so main lives here.
BENCHMARK_MAIN();
