// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "motif/denoiser.hpp"
#include "motif/diffusion.hpp"
#include "motif/evalkit.hpp"
#include "motif/motionmap.hpp"
#include "motif/rng.hpp"
#include "motif/synthvid.hpp"
#include "motif/train.hpp"

namespace motif {
namespace {

TrainConfig bench_config() {
  TrainConfig c;
  c.finalize();
  return c;
}

Clip sample_clip() {
  DatasetConfig d;
  d.size = 1;
  return gen_dataset(d, 3).next();
}

TrainingBatch sample_batch(const TrainConfig& c, int items) {
  DatasetConfig d;
  d.size = static_cast<std::size_t>(items);
  ClipStream stream = gen_dataset(d, 5);
  const DiffusionSchedule s = c.schedule();
  Rng rng(9);
  TrainingBatch batch;
  while (!stream.done()) {
    const PreparedClip p = prepare_clip(stream.next(), c);
    batch.push_back(noised_item(p, s, rng.uniform_int(1, c.timesteps), p.prompt_index, c.loss.residual, rng));
  }
  return batch;
}

void BM_DenoiserForward(benchmark::State& state) {
  const TrainConfig c = bench_config();
  const DenoiserParams p = init_denoiser(c.model, 1);
  const PreparedClip clip = prepare_clip(sample_clip(), c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(denoiser_forward(p, clip.z0, clip.z0, 500, clip.prompt_index));
  }
}
BENCHMARK(BM_DenoiserForward)->Unit(benchmark::kMillisecond);

template <class T>
void BM_LossAndGrads(benchmark::State& state) {
  const TrainConfig c = bench_config();
  const DenoiserParams p = init_denoiser(c.model, 1);
  const TrainingBatch batch = sample_batch(c, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_and_grads<T>(p, batch, c.loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrads<float>)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossAndGrads<double>)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_EstimateVideoFlow(benchmark::State& state) {
  const Clip clip = sample_clip();
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_video_flow(clip.video));
  }
}
BENCHMARK(BM_EstimateVideoFlow)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
  const Clip clip = sample_clip();
  const int p = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode(clip.video, p));
  }
}
BENCHMARK(BM_Encode)->Arg(1)->Arg(2)->Arg(4);

void BM_Generate(benchmark::State& state) {
  const TrainConfig c = bench_config();
  Model m{c, init_denoiser(c.model, 1)};
  const Clip clip = sample_clip();
  Video start({1, clip.video.height(), clip.video.width(), 3});
  std::copy_n(clip.video.data().begin(), start.size(), start.data().begin());
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate(m, start, clip.prompt.embedding_index(), {steps, 7.5, 0}));
  }
}
BENCHMARK(BM_Generate)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_ClassifyMotion(benchmark::State& state) {
  const Clip clip = sample_clip();
  for (auto _ : state) {
    benchmark::DoNotOptimize(classify_motion(clip.video));
  }
}
BENCHMARK(BM_ClassifyMotion)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace motif

BENCHMARK_MAIN();
