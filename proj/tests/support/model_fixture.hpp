#pragma once

#include <vector>

#include "slmgac/feedsim/log.hpp"
#include "slmgac/trainer/model.hpp"

namespace slmgac::testing {

/// Small simulated log plus a model whose prior is fitted on it.
struct ModelFixture {
  feedsim::LoggedDataset data;
  trainer::ModelConfig config;
  trainer::Model model;
  std::vector<trainer::Sample> samples;
  std::vector<const trainer::Sample*> batch;

  explicit ModelFixture(std::size_t batch_size = 8, std::uint64_t seed = 3, int K = 6,
                        bool small = false) {
    feedsim::SimConfig sim;
    sim.seed = seed;
    sim.K = K;
    data = feedsim::simulate(sim, feedsim::uniform_policy(), 24, 4);
    config.K = K;
    if (small) {
      config.encoder.table_rows = 200;
      config.encoder.embed_dim = 4;
      config.encoder.attention_hidden = 6;
      config.encoder.mlp_widths = {12, 10};
      config.towers.actor = {6, 2};
      config.towers.rpn = {6, 8};
      config.towers.qrn = {6, 2};
    }
    model = trainer::Model(config, seed);
    const trainer::SampleContext ctx{&config.bins, nullptr, data.config.lambda, 100.0};
    samples = trainer::prepare_samples(data, ctx);
    trainer::fit_prior(model.prior, config.bins, K, samples);
    for (std::size_t i = 0; i < batch_size && i < samples.size(); ++i) {
      batch.push_back(&samples[i * 7 % samples.size()]);
    }
  }
};

}  // namespace slmgac::testing
