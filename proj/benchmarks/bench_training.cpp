// Throughput of the pieces a training step is made of, at the default model size.

#include <benchmark/benchmark.h>

#include "slmgac/feedsim/simulator.hpp"
#include "slmgac/ope/ncis.hpp"
#include "slmgac/trainer/trainer.hpp"

using namespace slmgac;

namespace {

struct Fixture {
  feedsim::LoggedDataset data;
  trainer::Model model;
  std::vector<trainer::Sample> samples;

  Fixture() {
    feedsim::SimConfig sim;
    data = feedsim::simulate(sim, feedsim::uniform_policy(), 400, 30);
    model = trainer::Model(trainer::ModelConfig{}, 1);
    const trainer::SampleContext ctx{&model.config().bins, nullptr, data.config.lambda, 100.0};
    samples = trainer::prepare_samples(data, ctx);
    trainer::fit_prior(model.prior, model.config().bins, model.config().K, samples);
  }

  std::vector<const trainer::Sample*> batch(std::size_t n) const {
    std::vector<const trainer::Sample*> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(&samples[i * 13 % samples.size()]);
    return out;
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_Forward(benchmark::State& state) {
  auto& f = fixture();
  const auto batch = f.batch(static_cast<std::size_t>(state.range(0)));
  trainer::LossSettings settings;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trainer::compute_losses(f.model, batch, settings));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  auto& f = fixture();
  const auto batch = f.batch(static_cast<std::size_t>(state.range(0)));
  trainer::LossSettings settings;
  auto params = f.model.trainable();
  for (auto _ : state) {
    diffcore::zero_grads(params);
    benchmark::DoNotOptimize(trainer::accumulate_gradients(f.model, batch, settings));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

void BM_Simulate(benchmark::State& state) {
  feedsim::SimConfig sim;
  for (auto _ : state) {
    benchmark::DoNotOptimize(feedsim::simulate(sim, feedsim::uniform_policy(), 200, 30));
  }
  state.SetItemsProcessed(state.iterations() * 200 * 30);
}
BENCHMARK(BM_Simulate);

void BM_Ncis(benchmark::State& state) {
  auto& f = fixture();
  std::vector<double> probs;
  for (const auto& t : f.data.transitions) probs.push_back(t.action ? 0.7 : 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ope::ncis(f.data, probs, {}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.data.transitions.size()));
}
BENCHMARK(BM_Ncis);

}  // namespace

BENCHMARK_MAIN();
