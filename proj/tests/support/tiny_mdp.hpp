#pragma once

// Two-state, two-action MDP embedded in the logged-data format. Groups belong
// to users, so each of the two groups gets its own copy of every (s, a, a')
// combination and learns the whole MDP.
// s0: a0 -> s0 (y_l 0, y_v 500); a1 -> s1 (y_l 100, y_v 1200)
// s1: a0 -> s0 (y_l 0, y_v 550); a1 -> s1 (y_l 400, y_v 700)
// Each action lands in the same watch-time bins from both states, so the
// per-group bin prior used for counterfactual actions is exact. With B = 6,
// lambda = 1 and tau_r = 100 the best move in s0 is the immediately worse a1.

#include <array>
#include <vector>

#include "slmgac/diffcore/ops.hpp"
#include "slmgac/feedsim/log.hpp"
#include "slmgac/feedsim/simulator.hpp"
#include "slmgac/ope/tabular.hpp"
#include "slmgac/trainer/trainer.hpp"

namespace slmgac::testing {

struct TinyOutcome {
  double y_l;
  double y_v;
};

inline constexpr std::array<std::array<TinyOutcome, 2>, 2> kTinyOutcomes{{
    {{{0.0, 500.0}, {100.0, 1200.0}}},
    {{{0.0, 550.0}, {400.0, 700.0}}},
}};
inline constexpr double kTinyTauR = 100.0;

inline encoder::StateFeatures tiny_state(int s, int group) {
  using feedsim::Field;
  using feedsim::feature_id;
  const auto v = static_cast<std::uint64_t>(s);
  encoder::StateFeatures f;
  f.user_static_ids = {feature_id(Field::user, 10 + v), feature_id(Field::recent_injections, v),
                       feature_id(Field::hour, 3 + v)};
  f.live_item_ids = {feature_id(Field::live, 20 + v), feature_id(Field::author, 30 + v),
                     feature_id(Field::viewer_bucket, 1 + v), feature_id(Field::author_gender, v)};
  f.live_history_ids = {feature_id(Field::live, 40 + v), feature_id(Field::live, 50 + v)};
  f.video_history_ids = {feature_id(Field::video, 60 + v), feature_id(Field::video, 70 + v),
                         feature_id(Field::video, 80 + v)};
  f.group_id = group;
  return f;
}

inline feedsim::LoggedDataset tiny_mdp_dataset() {
  feedsim::LoggedDataset d;
  d.config.K = 2;
  d.config.B = 6;
  d.config.lambda = 1.0;
  d.behavior_policy = "uniform";
  d.steps = 1;
  std::uint64_t id = 0;
  for (int g = 0; g < 2; ++g) {
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      const int next = a;
      for (int a2 = 0; a2 < 2; ++a2) {
        feedsim::Transition t;
        t.trajectory_id = id;
        t.user_id = static_cast<int>(id++);
        t.group_id = g;
        t.trailing_live_watch = g;
        t.state = tiny_state(s, g);
        t.action = a;
        t.y_l = kTinyOutcomes[s][a].y_l;
        t.y_v = kTinyOutcomes[s][a].y_v;
        t.reward = feedsim::reward(t.y_l, t.y_v, 6, 1.0);
        t.constraint = feedsim::constraint_value(t.y_l, t.y_v, 6);
        t.behavior_propensity = 0.5;
        feedsim::NextStep n;
        n.state = tiny_state(next, g);
        n.action = a2;
        n.y_l = kTinyOutcomes[next][a2].y_l;
        n.y_v = kTinyOutcomes[next][a2].y_v;
        n.reward = feedsim::reward(n.y_l, n.y_v, 6, 1.0);
        n.behavior_propensity = 0.5;
        t.next = n;
        d.transitions.push_back(t);
        ++d.num_users;
      }
    }
  }
  }
  return d;
}

/// The same MDP over normalized rewards, the scale the critics learn.
inline ope::TabularMDP tiny_mdp(double gamma) {
  ope::TabularMDP m;
  m.num_states = 2;
  m.num_actions = 2;
  m.gamma = gamma;
  m.P.assign(2, std::vector<std::vector<double>>(2, std::vector<double>(2, 0.0)));
  m.R.assign(2, std::vector<double>(2, 0.0));
  for (int s = 0; s < 2; ++s) {
    for (int a = 0; a < 2; ++a) {
      m.P[s][a][a] = 1.0;
      const auto& o = kTinyOutcomes[s][a];
      m.R[s][a] = diffcore::sigmoid(feedsim::reward(o.y_l, o.y_v, 6, 1.0) / kTinyTauR);
    }
  }
  return m;
}

inline trainer::TrainConfig tiny_train_config(std::uint64_t seed) {
  trainer::TrainConfig c;
  c.K = 2;
  c.batch_size = 16;
  c.steps = 3000;
  c.seed = seed;
  c.probe_size = 16;
  c.eval_interval = 50;
  c.sync.mode = critic::SyncMode::polyak;
  c.sync.tau = 0.05;
  c.lambda = 1.0;
  c.tau_r = kTinyTauR;
  return c;
}

struct TinyLearned {
  std::array<ope::QTable, 2> q;                // per group: min over the current critics
  std::array<std::vector<int>, 2> actor;       // per group: argmax of the actor per state
};

inline TinyLearned tiny_learned(trainer::Model& model, const feedsim::LoggedDataset& data,
                                double gamma) {
  const trainer::SampleContext ctx{&model.config().bins, nullptr, 1.0, kTinyTauR};
  const auto samples = trainer::prepare_samples(data, ctx);
  std::vector<const trainer::Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);
  const auto q = trainer::min_critic_q(model, batch, gamma, kTinyTauR);
  TinyLearned out;
  for (int g = 0; g < 2; ++g) {
    out.q[g].assign(2, std::vector<double>(2, 0.0));
    for (int s = 0; s < 2; ++s) {
      const auto enc = model.encoder.encode(tiny_state(s, g), encoder::GradMode::actor_path);
      out.actor[g].push_back(actor::argmax(model.actor.policy_forward(enc.h_prime_s, g).p));
    }
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& t = data.transitions[i];
    const int s = t.state == tiny_state(0, t.group_id) ? 0 : 1;
    out.q[t.group_id][s][t.action] = q(static_cast<Eigen::Index>(i), t.action);
  }
  return out;
}

}  // namespace slmgac::testing
