#include "slmgac/trainer/model.hpp"

#include <algorithm>

#include "slmgac/diffcore/ops.hpp"
#include "slmgac/errors.hpp"

namespace slmgac::trainer {

using critic::BinWeights;
using critic::Medium;
using diffcore::Matrix;
using diffcore::ParamRefs;
using Eigen::VectorXd;

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng = make_rng(seed, 0x6d6f64656cull);
  encoder = encoder::Encoder(config_.encoder, rng);
  target_encoder = encoder;
  const auto K = static_cast<std::size_t>(config_.K);
  const auto h = config_.encoder.output_dim();
  actor = actor::Actor(K, h, config_.towers.actor, config_.layer_norm, rng);
  critics = critic::CriticPair(K, h, config_.towers.rpn, config_.towers.qrn, config_.layer_norm, rng);
  prior = critic::BinPrior(config_.bins, config_.K);
  prior.finalize();
}

ParamRefs Model::trainable() {
  ParamRefs out;
  encoder.collect("encoder", out);
  actor.collect("actor", out);
  critics.collect("critics", out);
  return out;
}

ParamRefs Model::embedding_params() {
  ParamRefs out;
  encoder.collect_embeddings("encoder", out);
  return out;
}

ParamRefs Model::hidden_params() {
  ParamRefs out;
  encoder.collect_dense("encoder", out);
  actor.collect("actor", out);
  critics.collect("critics", out);
  return out;
}

ParamRefs Model::actor_params() {
  ParamRefs out;
  actor.collect("actor", out);
  return out;
}

ParamRefs Model::critic_side_params() {
  ParamRefs out;
  encoder.collect("encoder", out);
  critics.collect("critics", out);
  return out;
}

ParamRefs Model::target_params() {
  ParamRefs out;
  target_encoder.collect("target_encoder", out);
  critics.collect_targets("target_critics", out);
  return out;
}

ParamRefs Model::encoder_params() {
  ParamRefs out;
  encoder.collect("encoder", out);
  return out;
}

void Model::sync_targets(critic::SyncMode mode, double tau) {
  ParamRefs src, dst;
  encoder.collect("", src);
  target_encoder.collect("", dst);
  critic::blend_params(src, dst, mode == critic::SyncMode::hard ? 1.0 : tau);
  critics.sync_targets(mode, tau);
}

Sample prepare_sample(const feedsim::Transition& t, const SampleContext& ctx) {
  const auto& spec = *ctx.bins;
  Sample s;
  s.state = &t.state;
  s.group = ctx.groups ? ctx.groups->group_of(t.user_id, t.trailing_live_watch) : t.group_id;
  s.action = t.action;
  s.video_scale = ctx.lambda / static_cast<double>(t.num_videos);
  s.bins = {critic::bin_of(t.y_l, Medium::live, t.action, spec),
            critic::bin_of(t.y_v, Medium::video, t.action, spec)};
  s.r_norm = critic::normalized_reward(s.bins.live, s.bins.video, s.video_scale, ctx.tau_r, spec);
  if (t.next) {
    s.next_state = &t.next->state;
    s.next_action = t.next->action;
    s.next_video_scale = ctx.lambda / static_cast<double>(t.next->num_videos);
    s.next_bins = {critic::bin_of(t.next->y_l, Medium::live, t.next->action, spec),
                   critic::bin_of(t.next->y_v, Medium::video, t.next->action, spec)};
  }
  return s;
}

std::vector<Sample> prepare_samples(const feedsim::LoggedDataset& data, const SampleContext& ctx) {
  std::vector<Sample> out;
  out.reserve(data.transitions.size());
  for (const auto& t : data.transitions) out.push_back(prepare_sample(t, ctx));
  return out;
}

void fit_prior(critic::BinPrior& prior, const critic::TimeBinSpec& bins, int K,
               std::span<const Sample> samples) {
  prior = critic::BinPrior(bins, K);
  for (const auto& s : samples) {
    prior.add(s.group, Medium::live, s.action, s.bins.live.index);
    prior.add(s.group, Medium::video, s.action, s.bins.video.index);
    if (s.next_state) {
      prior.add(s.group, Medium::live, s.next_action, s.next_bins.live.index);
      prior.add(s.group, Medium::video, s.next_action, s.next_bins.video.index);
    }
  }
  prior.finalize();
}

namespace {

enum class Step { current, next };

/// Bin weights when every row is evaluated at `action`.
BinWeights bin_weights(const Model& model, std::span<const Sample* const> batch, Step step,
                       int action) {
  const auto w = static_cast<Eigen::Index>(model.config().bins.width());
  const auto n = static_cast<Eigen::Index>(batch.size());
  BinWeights o{Matrix::Zero(n, w), Matrix::Zero(n, w)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = *batch[static_cast<std::size_t>(i)];
    const int observed = step == Step::current ? s.action : s.next_action;
    const auto& bins = step == Step::current ? s.bins : s.next_bins;
    if (action == observed) {
      o.live(i, static_cast<Eigen::Index>(bins.live.index)) = 1.0;
      o.video(i, static_cast<Eigen::Index>(bins.video.index)) = 1.0;
    } else {
      const auto& pl = model.prior.weights(s.group, Medium::live, action);
      const auto& pv = model.prior.weights(s.group, Medium::video, action);
      o.live.row(i) = Eigen::Map<const Eigen::RowVectorXd>(pl.data(), w);
      o.video.row(i) = Eigen::Map<const Eigen::RowVectorXd>(pv.data(), w);
    }
  }
  return o;
}

critic::RewardScale reward_scale(std::span<const Sample* const> batch, Step step, double tau_r) {
  critic::RewardScale scale;
  scale.tau_r = tau_r;
  scale.video_scale.resize(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    scale.video_scale[static_cast<Eigen::Index>(i)] =
        step == Step::current ? batch[i]->video_scale : batch[i]->next_video_scale;
  }
  return scale;
}

/// n x 2 min over critics of Q at both actions, from already computed towers.
Matrix min_q_both(const Model& model, std::span<const Sample* const> batch, Step step,
                  const std::array<critic::Critic::Towers, 2>& towers, double gamma,
                  double tau_r) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto scale = reward_scale(batch, step, tau_r);
  Matrix q(n, 2);
  for (int a = 0; a < 2; ++a) {
    const BinWeights o = bin_weights(model, batch, step, a);
    const std::vector<int> actions(batch.size(), a);
    VectorXd best;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto pred = critic::predict_reward(towers[i], o, scale, model.config().bins);
      const VectorXd qi = critic::q_values(pred, towers[i].t, actions, gamma);
      best = i == 0 ? qi : best.cwiseMin(qi);
    }
    q.col(a) = best;
  }
  return q;
}

std::vector<int> groups_of(std::span<const Sample* const> batch) {
  std::vector<int> g;
  g.reserve(batch.size());
  for (const Sample* s : batch) g.push_back(s->group);
  return g;
}

}  // namespace

Eigen::VectorXd q_labels(const Model& model, std::span<const Sample* const> batch,
                         const LossSettings& settings) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  VectorXd labels(n);
  std::vector<const Sample*> live;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample* s = batch[static_cast<std::size_t>(i)];
    labels[i] = s->r_norm;
    if (s->next_state && settings.gamma != 0.0) {
      live.push_back(s);
      rows.push_back(i);
    }
  }
  if (live.empty()) return labels;

  encoder::StateBatch next_states;
  std::vector<int> next_groups;
  for (const Sample* s : live) {
    next_states.push_back(s->next_state);
    next_groups.push_back(s->group);
  }
  const auto h_next =
      model.target_encoder.encode(next_states, encoder::GradMode::critic_path).h_prime_s;
  const std::array<critic::Critic::Towers, 2> towers{
      model.critics.target[0].forward(h_next, next_groups),
      model.critics.target[1].forward(h_next, next_groups)};
  const Matrix q_next = min_q_both(model, live, Step::next, towers, settings.gamma, settings.tau_r);

  Matrix p_next;
  if (settings.flags.vanilla_label) {
    const auto h = model.encoder.encode(next_states, encoder::GradMode::actor_path).h_prime_s;
    p_next = model.actor.probabilities(h, next_groups);
  }
  for (std::size_t k = 0; k < live.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const std::array<double, 2> q{q_next(r, 0), q_next(r, 1)};
    const double r_norm = live[k]->r_norm;
    labels[rows[k]] = settings.flags.vanilla_label
                          ? critic::q_label_vanilla(r_norm, false, settings.gamma,
                                                    {p_next(r, 0), p_next(r, 1)}, q)
                          : critic::q_label(r_norm, false, settings.gamma, q);
  }
  return labels;
}

Matrix min_critic_q(const Model& model, std::span<const Sample* const> batch, double gamma,
                    double tau_r) {
  encoder::StateBatch states;
  for (const Sample* s : batch) states.push_back(s->state);
  const auto groups = groups_of(batch);
  const auto h = model.encoder.encode(states, encoder::GradMode::critic_path).h_prime_s;
  const std::array<critic::Critic::Towers, 2> towers{model.critics.current[0].forward(h, groups),
                                                     model.critics.current[1].forward(h, groups)};
  return min_q_both(model, batch, Step::current, towers, gamma, tau_r);
}

namespace {

// `sink` receives the gradients; null runs the forward pass only.
StepLosses run_losses(const Model& model, Model* sink, std::span<const Sample* const> batch,
                      const LossSettings& settings, LossSelection selection) {
  StepLosses losses;
  if (batch.empty()) return losses;
  const bool use_sl = selection.sl && !settings.flags.no_sl;
  const bool critic_grads = selection.critic || use_sl;
  const bool actor_into_encoder = selection.actor && settings.flags.no_sg;
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto& spec = model.config().bins;

  encoder::StateBatch states;
  std::vector<int> actions;
  for (const Sample* s : batch) {
    states.push_back(s->state);
    actions.push_back(s->action);
  }
  const auto groups = groups_of(batch);

  encoder::Encoder::Cache enc_cache;
  const auto encoded = model.encoder.encode(states, encoder::GradMode::critic_path, &enc_cache);
  const Matrix& h = encoded.h_prime_s;

  std::array<critic::Critic::Cache, 2> caches;
  std::array<critic::Critic::Towers, 2> towers;
  std::array<critic::Critic::Towers, 2> grads;
  for (std::size_t i = 0; i < 2; ++i) {
    towers[i] = model.critics.current[i].forward(h, groups, &caches[i]);
    grads[i] = {Matrix::Zero(towers[i].f_gamma.rows(), towers[i].f_gamma.cols()),
                Matrix::Zero(towers[i].g_theta.rows(), towers[i].g_theta.cols()),
                Matrix::Zero(n, 2)};
  }

  if (selection.critic) {
    // Observed action: every row uses its own recorded bins.
    const auto w = static_cast<Eigen::Index>(spec.width());
    BinWeights o{Matrix::Zero(n, w), Matrix::Zero(n, w)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const Sample& s = *batch[static_cast<std::size_t>(i)];
      o.live(i, static_cast<Eigen::Index>(s.bins.live.index)) = 1.0;
      o.video(i, static_cast<Eigen::Index>(s.bins.video.index)) = 1.0;
    }
    const auto scale = reward_scale(batch, Step::current, settings.tau_r);
    const VectorXd labels = q_labels(model, batch, settings);
    std::array<critic::RewardPrediction, 2> preds;
    std::array<VectorXd, 2> q;
    for (std::size_t i = 0; i < 2; ++i) {
      preds[i] = critic::predict_reward(towers[i], o, scale, spec);
      q[i] = critic::q_values(preds[i], towers[i].t, actions, settings.gamma);
    }
    std::array<VectorXd, 2> dq;
    losses.critic = critic::critic_loss(q, labels, settings.huber_delta, sink ? &dq : nullptr);
    for (std::size_t i = 0; sink && i < 2; ++i) {
      critic::reward_backward(dq[i], preds[i], o, scale, spec, grads[i]);
      for (Eigen::Index b = 0; b < n; ++b) {
        grads[i].t(b, actions[static_cast<std::size_t>(b)]) += settings.gamma * dq[i][b];
      }
    }
  }

  if (use_sl) {
    std::vector<critic::RatioTarget> targets;
    targets.reserve(batch.size());
    for (const Sample* s : batch) targets.push_back(s->bins);
    losses.sl = critic::sl_loss({&towers[0], &towers[1]}, targets, settings.huber_delta,
                                sink ? std::array<critic::Critic::Towers*, 2>{&grads[0], &grads[1]}
                                     : std::array<critic::Critic::Towers*, 2>{nullptr, nullptr});
  }

  Matrix grad_h = Matrix::Zero(n, h.cols());
  if (sink && critic_grads) {
    for (std::size_t i = 0; i < 2; ++i) grad_h += sink->critics.current[i].backward(grads[i], caches[i]);
  }

  if (selection.actor) {
    const Matrix q_hat = min_q_both(model, batch, Step::current, towers, settings.gamma, settings.tau_r);
    const auto weights = actor::actor_weights(q_hat, actions, !settings.flags.no_qnorm);
    actor::Actor::Cache actor_cache;
    const Matrix logits = model.actor.logits(h, groups, &actor_cache);
    const Matrix p = diffcore::softmax(logits);
    Matrix grad_logits;
    const auto loss = actor::actor_loss(p, actions, weights, sink ? &grad_logits : nullptr);
    losses.actor = loss.value;
    losses.clamped = loss.clamped;
    if (sink) {
      const Matrix grad_actor_h = sink->actor.backward(grad_logits, actor_cache);
      if (actor_into_encoder) grad_h += grad_actor_h;
    }
  }

  if (sink && (critic_grads || actor_into_encoder)) sink->encoder.backward(grad_h, encoded, enc_cache);
  return losses;
}

}  // namespace

StepLosses accumulate_gradients(Model& model, std::span<const Sample* const> batch,
                                const LossSettings& settings, LossSelection selection) {
  return run_losses(model, &model, batch, settings, selection);
}

StepLosses compute_losses(const Model& model, std::span<const Sample* const> batch,
                          const LossSettings& settings, LossSelection selection) {
  return run_losses(model, nullptr, batch, settings, selection);
}

ProbeStats evaluate_probe(const Model& model, std::span<const Sample* const> probe, double gamma,
                          double tau_r) {
  ProbeStats stats;
  if (probe.empty()) return stats;
  encoder::StateBatch states;
  std::vector<int> actions;
  for (const Sample* s : probe) {
    states.push_back(s->state);
    actions.push_back(s->action);
  }
  const auto groups = groups_of(probe);
  const auto h = model.encoder.encode(states, encoder::GradMode::actor_path).h_prime_s;
  const auto n = static_cast<Eigen::Index>(probe.size());
  const auto w = static_cast<Eigen::Index>(model.config().bins.width());
  BinWeights o{Matrix::Zero(n, w), Matrix::Zero(n, w)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = *probe[static_cast<std::size_t>(i)];
    o.live(i, static_cast<Eigen::Index>(s.bins.live.index)) = 1.0;
    o.video(i, static_cast<Eigen::Index>(s.bins.video.index)) = 1.0;
  }
  const auto scale = reward_scale(probe, Step::current, tau_r);
  VectorXd q_min;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto towers = model.critics.current[i].forward(h, groups);
    const auto pred = critic::predict_reward(towers, o, scale, model.config().bins);
    const VectorXd q = critic::q_values(pred, towers.t, actions, gamma);
    stats.max_abs_gamma_t = std::max(stats.max_abs_gamma_t, (q - pred.R).cwiseAbs().maxCoeff());
    q_min = i == 0 ? q : q_min.cwiseMin(q);
  }
  stats.mean_q = q_min.mean();
  stats.max_q = q_min.maxCoeff();
  const Matrix p = model.actor.probabilities(h, groups);
  std::size_t inject = 0;
  for (Eigen::Index i = 0; i < n; ++i) inject += p(i, 1) > p(i, 0);
  stats.alloc_ratio = static_cast<double>(inject) / static_cast<double>(n);
  return stats;
}

std::vector<double> inject_probabilities(const encoder::Encoder& enc, const actor::Actor& act,
                                         std::span<const encoder::StateFeatures* const> states,
                                         std::span<const int> groups) {
  constexpr std::size_t kChunk = 1024;
  std::vector<double> out;
  out.reserve(states.size());
  for (std::size_t begin = 0; begin < states.size(); begin += kChunk) {
    const std::size_t end = std::min(states.size(), begin + kChunk);
    encoder::StateBatch batch(states.begin() + begin, states.begin() + end);
    std::vector<int> g(groups.begin() + begin, groups.begin() + end);
    const Matrix p =
        act.probabilities(enc.encode(batch, encoder::GradMode::actor_path).h_prime_s, g);
    for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back(p(i, 1));
  }
  return out;
}

}  // namespace slmgac::trainer
