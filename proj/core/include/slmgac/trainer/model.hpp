#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slmgac/actor/actor.hpp"
#include "slmgac/critic/critic.hpp"
#include "slmgac/critic/time_bins.hpp"
#include "slmgac/encoder/encoder.hpp"
#include "slmgac/feedsim/log.hpp"
#include "slmgac/feedsim/simulator.hpp"
#include "slmgac/trainer/config.hpp"

namespace slmgac::trainer {

/// Shared encoder (plus its target copy), the actor, and the critic pair.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  encoder::Encoder encoder;
  encoder::Encoder target_encoder;
  actor::Actor actor;
  critic::CriticPair critics;
  critic::BinPrior prior;

  /// Every trainable parameter (targets excluded).
  diffcore::ParamRefs trainable();
  diffcore::ParamRefs embedding_params();
  /// Trainable parameters other than the embedding table.
  diffcore::ParamRefs hidden_params();
  diffcore::ParamRefs actor_params();
  /// Trainable parameters other than the actor.
  diffcore::ParamRefs critic_side_params();
  diffcore::ParamRefs target_params();
  /// The shared encoder alone; a policy snapshot carries it next to actor_params().
  diffcore::ParamRefs encoder_params();

  /// Target encoder and target critics follow the current ones.
  void sync_targets(critic::SyncMode mode, double tau = 1.0);

 private:
  ModelConfig config_;
};

/// A transition with everything the losses need precomputed.
struct Sample {
  const encoder::StateFeatures* state = nullptr;
  const encoder::StateFeatures* next_state = nullptr;  // null when terminal
  int group = 0;
  int action = 0;
  int next_action = 0;
  double video_scale = 0.0;       // lambda / B
  double next_video_scale = 0.0;
  critic::RatioTarget bins;
  critic::RatioTarget next_bins;
  double r_norm = 0.0;
};

struct SampleContext {
  const critic::TimeBinSpec* bins = nullptr;
  const feedsim::GroupAssigner* groups = nullptr;  // null: use the logged group
  double lambda = 1.0;
  double tau_r = 100.0;
};

Sample prepare_sample(const feedsim::Transition& t, const SampleContext& ctx);
std::vector<Sample> prepare_samples(const feedsim::LoggedDataset& data, const SampleContext& ctx);

/// Fits model.prior from the samples' observed bins.
void fit_prior(critic::BinPrior& prior, const critic::TimeBinSpec& bins, int K,
               std::span<const Sample> samples);

struct LossSelection {
  bool actor = true;
  bool critic = true;
  bool sl = true;
};

struct LossSettings {
  double gamma = 0.9;
  double huber_delta = 1.0;
  double tau_r = 100.0;
  AblationFlags flags;
};

struct StepLosses {
  double actor = 0.0;
  double critic = 0.0;
  double sl = 0.0;
  std::size_t clamped = 0;
};

/// Forward and backward of the selected losses on one batch. Gradients are
/// accumulated (never zeroed) into the trainable parameters.
StepLosses accumulate_gradients(Model& model, std::span<const Sample* const> batch,
                                const LossSettings& settings, LossSelection selection = {});

/// The same losses without touching any gradient.
StepLosses compute_losses(const Model& model, std::span<const Sample* const> batch,
                          const LossSettings& settings, LossSelection selection = {});
/// Clipped double-Q (or vanilla) labels for the batch, from the target networks.
Eigen::VectorXd q_labels(const Model& model, std::span<const Sample* const> batch,
                         const LossSettings& settings);

/// min over the two current critics of Q(s, a) for a in {0, 1}; n x 2.
/// Observed actions use their recorded bins, the other action the prior.
diffcore::Matrix min_critic_q(const Model& model, std::span<const Sample* const> batch,
                              double gamma, double tau_r);

struct ProbeStats {
  double mean_q = 0.0;
  double max_q = 0.0;
  double alloc_ratio = 0.0;
  double max_abs_gamma_t = 0.0;  // max |Q - R| over the probe
};

ProbeStats evaluate_probe(const Model& model, std::span<const Sample* const> probe, double gamma,
                          double tau_r);

/// Greedy actor probabilities p(s, 1) for each state.
std::vector<double> inject_probabilities(const encoder::Encoder& enc, const actor::Actor& act,
                                         std::span<const encoder::StateFeatures* const> states,
                                         std::span<const int> groups);

}  // namespace slmgac::trainer
