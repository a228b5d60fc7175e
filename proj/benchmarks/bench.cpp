#include <benchmark/benchmark.h>

#include "coopcart/config.hpp"
#include "coopcart/replay.hpp"
#include "coopcart/rng.hpp"
#include "coopcart/trainer.hpp"

namespace {

using namespace coopcart;

void BM_EnvStep(benchmark::State& state) {
  CartPoleEnv env(EnvConfig{});
  Rng rng(1);
  env.reset(rng);
  const JointControl u = {1.0, -0.5};
  for (auto _ : state) {
    if (!env.episode_live()) env.reset(rng);
    benchmark::DoNotOptimize(env.step(u));
  }
}
BENCHMARK(BM_EnvStep);

void BM_TerSample(benchmark::State& state) {
  ReplayMemory memory(100000);
  for (std::uint64_t k = 1; k <= 100000; ++k) {
    Experience e;
    e.collect_step = k;
    e.joint_control = {0.0, 0.0};
    memory.push(std::move(e));
  }
  const TerParams params;
  Rng rng(2);
  const double epsilon = state.range(0) / 100.0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_ter(memory, params, epsilon, 100000, rng));
}
BENCHMARK(BM_TerSample)->Arg(100)->Arg(50)->Arg(0);

void BM_NetworkUpdate(benchmark::State& state) {
  NafConfig config;
  Rng rng(3);
  NafNetwork net(config, rng);
  AdamState opt(net.parameter_count());

  const Eigen::Index n = state.range(0);
  UpdateBatch batch;
  batch.states.resize(4, n);
  batch.controls.resize(n);
  batch.targets.resize(n);
  batch.learning_rates.resize(n);
  Rng data(4);
  const double rates[] = {5e-4, 2e-4, 5e-5};
  for (Eigen::Index i = 0; i < n; ++i) {
    batch.states.col(i) = Eigen::Vector4d{data.uniform(-2, 2), data.uniform(-2, 2),
                                          data.uniform(-0.2, 0.2), data.uniform(-2, 2)};
    batch.controls(i) = data.uniform(-10, 10);
    batch.targets(i) = data.uniform(-5, 5);
    batch.learning_rates(i) = rates[i % 3];
  }
  Rng dropout(5);
  for (auto _ : state) benchmark::DoNotOptimize(net.update(opt, batch, &dropout));
}
BENCHMARK(BM_NetworkUpdate)->Arg(80)->Arg(160)->Arg(320);

void BM_TrainEpisode(benchmark::State& state) {
  RunConfig config;
  config.seed = 6;
  config.env.max_episode_steps = 50;
  Trainer trainer(config);
  // Fill the replay memories first so every timed step performs updates.
  while (trainer.agents()[0].memory().size() < 80) trainer.run_episode();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_episode());
  state.SetItemsProcessed(trainer.global_step());
}
BENCHMARK(BM_TrainEpisode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
