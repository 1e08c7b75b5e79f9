// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 3 8        only the listed ones
//
// Criteria 5 and 6 are directional comparisons on the simulator. Their lines
// are printed like the others but they do not set the exit code.

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "commands.hpp"
#include "run_config.hpp"
#include "slmgac/diffcore/grad_check.hpp"
#include "slmgac/feedsim/log.hpp"
#include "slmgac/ope/ncis.hpp"
#include "slmgac/ope/tabular.hpp"
#include "slmgac/trainer/snapshot.hpp"
#include "slmgac/trainer/trainer.hpp"
#include "slmgac/trainer/variants.hpp"
#include "tiny_mdp.hpp"

namespace fs = std::filesystem;
using namespace slmgac;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Collects named boolean checks; the first failures end up in the detail.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok) failed_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream os;
    os << what << " (got " << got << ", want " << want << ")";
    expect(std::abs(got - want) <= tol, os.str());
  }
  Outcome outcome() const {
    std::ostringstream os;
    os << (total_ - failed_.size()) << "/" << total_ << " checks";
    for (std::size_t i = 0; i < failed_.size() && i < 3; ++i) os << "; failed: " << failed_[i];
    return {failed_.empty(), os.str()};
  }

 private:
  std::size_t total_ = 0;
  std::vector<std::string> failed_;
};

// ---------------------------------------------------------------------------
// Small model on a small log, for the gradient and isolation criteria.

trainer::ModelConfig small_model_config(int K) {
  trainer::ModelConfig c;
  c.K = K;
  c.encoder.table_rows = 200;
  c.encoder.embed_dim = 4;
  c.encoder.attention_hidden = 6;
  c.encoder.mlp_widths = {12, 10};
  c.towers.actor = {6, 2};
  c.towers.rpn = {6, 8};
  c.towers.qrn = {6, 2};
  return c;
}

struct SmallSetup {
  feedsim::LoggedDataset data;
  trainer::Model model;
  std::vector<trainer::Sample> samples;

  SmallSetup(const trainer::ModelConfig& config, std::uint64_t seed) {
    feedsim::SimConfig sim;
    sim.seed = seed + 100;
    sim.K = config.K;
    data = feedsim::simulate(sim, feedsim::uniform_policy(), 24, 4);
    model = trainer::Model(config, seed);
    const trainer::SampleContext ctx{&model.config().bins, nullptr, data.config.lambda, 100.0};
    samples = trainer::prepare_samples(data, ctx);
    trainer::fit_prior(model.prior, model.config().bins, config.K, samples);
  }

  std::vector<const trainer::Sample*> batch(std::size_t n, std::size_t stride = 7) const {
    std::vector<const trainer::Sample*> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(&samples[i * stride % samples.size()]);
    return out;
  }
};

Outcome criterion_gradients() {
  Checks checks;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SmallSetup s(small_model_config(2), seed);
    const auto batch = s.batch(6);
    trainer::LossSettings settings;
    auto& model = s.model;
    const std::vector<std::pair<std::string, trainer::LossSelection>> losses{
        {"actor", {true, false, false}}, {"critic", {false, true, false}}, {"sl", {false, false, true}}};
    for (const auto& [name, sel] : losses) {
      const auto params = sel.actor ? model.actor_params() : model.critic_side_params();
      auto loss = [&, sel = sel] {
        const auto l = trainer::compute_losses(model, batch, settings, sel);
        return l.actor + l.critic + l.sl;
      };
      auto backprop = [&, sel = sel] { trainer::accumulate_gradients(model, batch, settings, sel); };
      diffcore::zero_grads(model.trainable());
      diffcore::GradCheckOptions opt;
      opt.tolerance = 1e-4;
      opt.max_entries_per_param = 40;
      opt.seed = seed;
      const auto report = diffcore::grad_check(params, loss, backprop, opt);
      worst = std::max(worst, report.worst_error());
      checks.expect(report.passed(), name + " loss, seed " + std::to_string(seed) + ": " + report.summary());
    }
  }
  auto out = checks.outcome();
  std::ostringstream os;
  os << out.detail << ", worst relative error " << worst;
  out.detail = os.str();
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion_formulas() {
  Checks c;
  // Attention pooling is a convex combination.
  {
    auto rng = make_rng(1);
    encoder::TargetAttention att(12, 4, 8, rng);
    const diffcore::Matrix q = diffcore::Matrix::Random(1, 12);
    const diffcore::Matrix e = diffcore::Matrix::Random(1, 4);
    c.expect(att.forward(q, e.replicate(4, 1), {0, 4}) == e, "attention over identical items");
    c.expect(att.forward(q, e, {0, 1}) == e, "attention over one item");
    encoder::TargetAttention::Cache cache;
    att.forward(q, diffcore::Matrix::Random(9, 4) * 3, {0, 9}, &cache);
    c.near(cache.weights.sum(), 1.0, 1e-12, "attention weights sum");
  }
  // Reward, penalized reward and constraint.
  c.near(feedsim::reward(30, 60, 6, 1.0), 20.0, 1e-12, "reward 30,60,6,1");
  c.near(feedsim::reward(30, 60, 6, 0.0), 30.0, 1e-12, "reward with lambda 0");
  c.near(feedsim::reward(0, 60, 6, 1.2), -12.0, 1e-12, "reward 0,60,6,1.2");
  c.near(feedsim::penalized_reward(10, 50, 5, 1.0), 10.0, 1e-12, "penalized 10,50,5,1");
  c.near(feedsim::penalized_reward(10, 50, 5, 0.0), 10.0, 1e-12, "penalized with lambda 0");
  c.near(feedsim::penalized_reward(7, 33, 4, 0.6), feedsim::reward(7, 33, 4, 0.6) + 0.6 * 7, 1e-12,
         "penalized identity");
  c.near(feedsim::constraint_value(10, 60, 6), 0.0, 1e-12, "constraint at boundary");
  c.near(feedsim::constraint_value(30, 60, 6), -20.0, 1e-12, "constraint 30,60,6");
  c.near(feedsim::constraint_value(0, 60, 6), 10.0, 1e-12, "constraint 0,60,6");
  // Labels.
  c.near(critic::q_label(0.5, false, 0.9, {0.2, 1.0}), 1.4, 1e-12, "clipped label");
  c.near(critic::q_label(0.5, true, 0.9, {0.2, 1.0}), 0.5, 0.0, "terminal label");
  c.near(critic::q_label_vanilla(0.5, false, 0.9, {0.5, 0.5}, {0.2, 1.0}), 1.04, 1e-12, "vanilla label");
  c.near(critic::q_label_vanilla(0.5, false, 0.9, {0.0, 1.0}, {0.2, 1.0}),
         critic::q_label(0.5, false, 0.9, {0.2, 1.0}), 0.0, "deterministic vanilla label");
  // Decomposition at gamma = 0 and 0.9 through a real critic.
  {
    const critic::TimeBinSpec spec;
    auto rng = make_rng(2);
    critic::Critic cr(2, 10, {6, 8}, {6, 2}, true, rng);
    const auto towers = cr.forward(diffcore::Matrix::Random(3, 10), {0, 1, 0});
    critic::BinWeights o{diffcore::Matrix::Zero(3, 8), diffcore::Matrix::Zero(3, 8)};
    for (int i = 0; i < 3; ++i) {
      o.live(i, 2 + i) = 1.0;
      o.video(i, 1 + i) = 1.0;
    }
    const critic::RewardScale scale{100.0, Eigen::VectorXd::Constant(3, 0.5)};
    const auto pred = critic::predict_reward(towers, o, scale, spec);
    c.expect(critic::q_values(pred, towers.t, {1, 0, 1}, 0.0) == pred.R, "gamma 0 gives Q = R");
    const auto q = critic::q_values(pred, towers.t, {1, 0, 1}, 0.9);
    c.expect(q[1] - 0.9 * towers.t(1, 0) == pred.R[1], "Q - gamma T = R");
  }
  // Discretization round trip and examples.
  {
    const critic::TimeBinSpec spec;
    const auto b = critic::bin_of(20, critic::Medium::live, 1, spec);
    c.expect(b.index == 2, "live 20 in [15, 30)");
    c.near(b.delta, 1.0 / 3.0, 1e-15, "live 20 ratio");
    c.expect(critic::bin_of(6, critic::Medium::live, 1, spec) == critic::BinAssignment{1, 0.0}, "boundary 6");
    c.expect(critic::bin_of(0, critic::Medium::live, 0, spec).index == spec.reserved_index(), "reserved bin");
    auto rng = make_rng(3);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double y = uniform01(rng) * 1200.0;
      worst = std::max(worst, std::abs(critic::reconstruct(critic::bin_of(y, critic::Medium::video, 1, spec),
                                                           critic::Medium::video, spec) - y));
    }
    c.near(worst, 0.0, 1e-9, "reconstruct round trip");
  }
  // Reward prediction midpoint and monotonicity.
  {
    const critic::TimeBinSpec spec;
    critic::Critic::Towers t{diffcore::Matrix::Constant(1, 8, 0.5), diffcore::Matrix::Constant(1, 8, 0.5),
                             diffcore::Matrix::Zero(1, 2)};
    critic::BinWeights o{diffcore::Matrix::Zero(1, 8), diffcore::Matrix::Zero(1, 8)};
    o.live(0, 2) = 1.0;   // F = 22.5
    o.video(0, 2) = 1.0;  // G = 17.5
    const auto mid = critic::predict_reward(t, o, {100.0, Eigen::VectorXd::Constant(1, 22.5 / 17.5)}, spec);
    c.near(mid.R[0], 0.5, 1e-15, "R midpoint");
    bool monotone = true;
    double last = -1.0;
    for (int k = 0; k <= 100; ++k) {
      t.f_gamma(0, 2) = k / 100.0;
      const double r = critic::predict_reward(t, o, {100.0, Eigen::VectorXd::Constant(1, 1.0)}, spec).R[0];
      monotone = monotone && r > last;
      last = r;
    }
    c.expect(monotone, "R increasing in F");
  }
  // Supervised loss is zero at the truth.
  {
    critic::Critic::Towers t{diffcore::Matrix::Constant(1, 8, 0.3), diffcore::Matrix::Constant(1, 8, 0.6),
                             diffcore::Matrix::Zero(1, 2)};
    const std::vector<critic::RatioTarget> target{{{4, 0.3}, {5, 0.6}}};
    c.near(critic::sl_loss({&t, &t}, target, 1.0), 0.0, 0.0, "SL loss at truth");
  }
  // Actor weight arithmetic.
  {
    diffcore::Matrix q(1, 2);
    q << std::log(3.0), 0.0;
    const auto w = actor::actor_weights(q, {0}, true);
    c.near(w[0], 0.75, 1e-15, "softmax weight");
    diffcore::Matrix p(1, 2);
    p << 0.5, 0.5;
    c.near(actor::actor_loss(p, {0}, w).value, 0.75 * std::log(2.0), 1e-15, "actor loss term");
    diffcore::Matrix eq(1, 2);
    eq << 0.3, 0.3;
    c.near(actor::actor_weights(eq, {1}, true)[0], 0.5, 1e-15, "equal Q weight");
  }
  // Exploration propensities.
  c.near(actor::epsilon_greedy_probability({0.1, 0.9}, 0.2, 1), 0.9, 1e-15, "greedy propensity");
  c.near(actor::epsilon_greedy_probability({0.1, 0.9}, 0.2, 0), 0.1, 1e-15, "exploring propensity");
  c.near(actor::epsilon_greedy_probability({0.1, 0.9}, 0.0, 1), 1.0, 0.0, "epsilon 0");
  // NCIS and value iteration examples.
  {
    const std::vector<double> r{1, 2, 3}, w{2, 1, 1};
    const std::vector<int> steps{0, 1, 2};
    c.near(ope::ncis(r, w, steps, 1, {1.5, 1.0}).estimate, 6.5 / 3.5, 1e-15, "capped NCIS");
    ope::TabularMDP m;
    m.num_states = 1;
    m.num_actions = 2;
    m.P = {{{1.0}, {1.0}}};
    m.R = {{1.0, 1.0}};
    m.gamma = 0.9;
    c.near(ope::value_iteration(m).q[0][1], 10.0, 1e-9, "geometric Q*");
  }
  // Group quantiles.
  {
    std::vector<feedsim::UserProfile> users(6);
    for (int i = 0; i < 6; ++i) {
      users[static_cast<std::size_t>(i)].user_id = 5 - i;
      users[static_cast<std::size_t>(i)].trailing_live_watch = 5 - i;
    }
    feedsim::assign_groups(users, 6);
    bool ordered = true;
    for (const auto& u : users) ordered = ordered && u.group_id == static_cast<int>(u.trailing_live_watch);
    c.expect(ordered, "quantile groups follow watch time");
  }
  return c.outcome();
}

// ---------------------------------------------------------------------------

Outcome criterion_tiny_mdp() {
  const auto data = testing::tiny_mdp_dataset();
  const auto vi = ope::value_iteration(testing::tiny_mdp(0.9));
  const auto optimal = ope::greedy_policy(vi.q);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : vi.q) {
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double bound = 0.05 * (hi - lo);
  int passed = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto result = trainer::train(data, testing::tiny_train_config(seed));
    const auto learned = testing::tiny_learned(result.model, data, 0.9);
    double err = 0.0;
    bool policy_ok = true;
    for (int g = 0; g < 2; ++g) {
      policy_ok = policy_ok && learned.actor[static_cast<std::size_t>(g)] == optimal;
      for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
          err = std::max(err, std::abs(learned.q[static_cast<std::size_t>(g)][static_cast<std::size_t>(s)]
                                                [static_cast<std::size_t>(a)] -
                                       vi.q[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)]));
        }
      }
    }
    worst = std::max(worst, err);
    passed += policy_ok && err < bound;
  }
  std::ostringstream os;
  os << passed << "/5 seeds, worst sup error " << worst << " vs bound " << bound;
  return {passed == 5, os.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion_isolation() {
  Checks c;
  SmallSetup s(small_model_config(6), 11);
  auto& model = s.model;
  trainer::LossSettings settings;

  diffcore::zero_grads(model.trainable());
  trainer::accumulate_gradients(model, s.batch(16), settings, {true, false, false});
  c.expect(diffcore::grad_squared_norm(model.encoder_params()) == 0.0, "encoder under actor loss");
  c.expect(diffcore::grad_squared_norm(model.critic_side_params()) == 0.0, "critics under actor loss");
  c.expect(diffcore::grad_squared_norm(model.actor_params()) > 0.0, "actor receives gradient");

  std::vector<const trainer::Sample*> group2;
  for (const auto& sample : s.samples) {
    if (sample.group == 2) group2.push_back(&sample);
  }
  c.expect(!group2.empty(), "log holds group 2 samples");
  diffcore::zero_grads(model.trainable());
  diffcore::zero_grads(model.target_params());
  trainer::accumulate_gradients(model, group2, settings);
  c.expect(diffcore::grad_squared_norm(model.target_params()) == 0.0, "targets under critic loss");
  std::vector<std::pair<std::string, mgsd::MultiGroupNet*>> nets{{"actor", &model.actor.net}};
  for (int i = 0; i < 2; ++i) {
    auto& cr = model.critics.current[static_cast<std::size_t>(i)];
    const auto tag = "critic" + std::to_string(i);
    nets.push_back({tag + ".rpn_live", &cr.f_gamma});
    nets.push_back({tag + ".rpn_video", &cr.g_theta});
    nets.push_back({tag + ".qrn", &cr.qrn});
  }
  for (auto& [name, net] : nets) {
    for (int g = 0; g < 6; ++g) {
      diffcore::ParamRefs refs;
      net->collect_head(g, "h", refs);
      const double norm = diffcore::grad_squared_norm(refs);
      if (g == 2) {
        c.expect(norm > 0.0, name + " head 2 receives gradient");
      } else {
        c.expect(norm == 0.0, name + " head " + std::to_string(g) + " is untouched");
      }
    }
  }
  return c.outcome();
}

// ---------------------------------------------------------------------------
// Desk-scale runs on the default simulator, shared by criteria 5 to 7.

struct DeskRuns {
  feedsim::LoggedDataset train;
  feedsim::LoggedDataset test;
  trainer::TrainConfig base;
  trainer::EvalSettings eval;
  std::optional<trainer::SuiteResult> sweep;  // K in {1, 6} x seeds 0..9
};

DeskRuns& desk() {
  static DeskRuns d = [] {
    DeskRuns r;
    feedsim::SimConfig sim;
    const auto data = feedsim::simulate(sim, cli::behavior_policy_by_name("group_heuristic", sim), 2000, 30);
    std::tie(r.train, r.test) = feedsim::split_by_trajectory(data, 5);
    r.base.batch_size = 64;
    r.base.steps = 600;
    r.base.probe_size = 256;
    r.base.eval_interval = 5;
    r.base.sync.period = 20;
    return r;
  }();
  return d;
}

const trainer::SuiteResult& k_sweep() {
  auto& d = desk();
  if (!d.sweep) {
    std::vector<std::uint64_t> seeds(10);
    std::iota(seeds.begin(), seeds.end(), 0);
    d.sweep = trainer::run_k_sweep(d.train, d.test, d.base, {1, 6}, seeds, d.eval);
  }
  return *d.sweep;
}

std::map<std::uint64_t, const trainer::SuiteRow*> rows_for_K(const trainer::SuiteResult& r, int K) {
  std::map<std::uint64_t, const trainer::SuiteRow*> out;
  for (const auto& row : r.rows) {
    if (row.K == K) out[row.seed] = &row;
  }
  return out;
}

Outcome criterion_q_stability() {
  const auto& sweep = k_sweep();
  const auto k1 = rows_for_K(sweep, 1), k6 = rows_for_K(sweep, 6);
  int wins = 0;
  std::ostringstream pairs;
  for (const auto& [seed, row6] : k6) {
    const auto* row1 = k1.at(seed);
    wins += row6->q_std < row1->q_std;
    pairs << (seed ? " " : "") << row6->q_std << "<" << row1->q_std;
  }
  std::ostringstream os;
  os << "q_std(K=6) < q_std(K=1) in " << wins << "/10 seeds [" << pairs.str() << "]";
  return {wins >= 8, os.str()};
}

Outcome criterion_qnorm_ablation() {
  auto& d = desk();
  const auto full = rows_for_K(k_sweep(), 6);
  const auto ablated = trainer::run_variant_suite(d.train, d.test, d.base,
                                                  {trainer::variant_by_name("SL-MGAC (w/o Q-norm)")},
                                                  {0, 1, 2, 3, 4}, d.eval);
  int wins = 0;
  std::ostringstream pairs;
  for (const auto& row : ablated.rows) {
    const double f = full.at(row.seed)->report.estimate;
    wins += f > row.report.estimate;
    pairs << (row.seed ? " " : "") << f << ">" << row.report.estimate;
  }
  std::ostringstream os;
  os << "NCIS(full) > NCIS(w/o Q-norm) in " << wins << "/5 seeds [" << pairs.str() << "]";
  return {wins >= 4, os.str()};
}

Outcome criterion_collapse() {
  const auto k6 = rows_for_K(k_sweep(), 6);
  int flagged = 0;
  std::ostringstream ratios;
  for (const auto& [seed, row] : k6) {
    flagged += row->collapsed;
    ratios << (seed ? " " : "") << row->final_alloc_ratio;
  }
  std::ostringstream os;
  os << flagged << "/10 default-config runs flagged; final allocation ratios [" << ratios.str() << "]";
  return {flagged == 0, os.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion_ope() {
  Checks c;
  auto& d = desk();
  std::vector<double> behavior;
  double sum = 0.0;
  for (const auto& t : d.test.transitions) {
    behavior.push_back(t.behavior_propensity);
    sum += std::pow(0.9, t.step) * t.reward;
  }
  const auto report = ope::ncis(d.test, behavior, {10.0, 0.9});
  c.near(report.estimate, sum / static_cast<double>(d.test.transitions.size()), 1e-9,
         "NCIS of the behavior policy");

  auto rng = make_rng(8);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(uniform01(rng) * 30);
    std::vector<double> rewards, ratios;
    std::vector<int> steps;
    for (int k = 0; k < n; ++k) {
      rewards.push_back(uniform01(rng) * 200 - 50);
      ratios.push_back(uniform01(rng) * 25);
      steps.push_back(k % 10);
    }
    const double c1 = uniform01(rng) * 20 + 1e-3;
    const double c2 = c1 + uniform01(rng) * 10;
    for (int k = 0; k < n; ++k) {
      const std::vector<double> r1{rewards[static_cast<std::size_t>(k)]}, w1{ratios[static_cast<std::size_t>(k)]};
      const std::vector<int> s1{steps[static_cast<std::size_t>(k)]};
      violations += ope::ncis(r1, w1, s1, 1, {c1, 0.9}).weight_sum > ope::ncis(r1, w1, s1, 1, {c2, 0.9}).weight_sum;
    }
    violations += ope::ncis(rewards, ratios, steps, 1, {c1, 0.9}).weight_sum >
                  ope::ncis(rewards, ratios, steps, 1, {c2, 0.9}).weight_sum;
  }
  c.expect(violations == 0, std::to_string(violations) + " cap monotonicity violations");
  auto out = c.outcome();
  out.detail += ", 1000 randomized cap cases";
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion_snapshots() {
  SmallSetup s(small_model_config(2), 9);
  trainer::SnapshotChannel channel;
  trainer::publish_snapshot(s.model, channel);
  const auto base = trainer::make_snapshot(s.model, 0);
  std::atomic<bool> done{false};
  std::atomic<long> torn{0}, regressions{0}, reads{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      std::uint64_t seen = 0;
      while (!done.load(std::memory_order_acquire)) {
        const auto snap = channel.latest();
        if (!snap->consistent()) ++torn;
        if (snap->version < seen) ++regressions;
        seen = snap->version;
        ++reads;
      }
    });
  }
  std::uint64_t last = channel.version();
  long non_increasing = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto v = channel.publish(base)->version;
    non_increasing += v <= last;
    last = v;
  }
  done.store(true, std::memory_order_release);
  for (auto& t : readers) t.join();
  std::ostringstream os;
  os << "10000 publishes, " << reads.load() << " reads by 4 readers, " << torn.load() << " torn, "
     << regressions.load() << " version regressions, " << non_increasing << " non-increasing versions";
  return {torn == 0 && regressions == 0 && non_increasing == 0, os.str()};
}

// ---------------------------------------------------------------------------

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"slmgac"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    files[fs::relative(entry.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return files;
}

Outcome criterion_determinism() {
  const auto root = fs::temp_directory_path() / "slmgac_acceptance_determinism";
  fs::remove_all(root);
  Checks c;
  const std::vector<std::string> sim{"--seed", "7", "--users", "300", "--steps", "20"};
  const std::vector<std::string> train{"--steps", "60", "--seed", "3", "--set", "train.batch_size=64",
                                       "--set", "train.probe_size=128", "--set", "train.eval_interval=5"};
  for (const char* run : {"a", "b"}) {
    auto args = std::vector<std::string>{"simulate", "-o", (root / run / "data").string()};
    args.insert(args.end(), sim.begin(), sim.end());
    c.expect(cli(args) == 0, std::string("simulate ") + run);
    args = {"train", "--data", (root / run / "data" / "train.jsonl").string(), "--probe",
            (root / run / "data" / "test.jsonl").string(), "-o", (root / run / "train").string()};
    args.insert(args.end(), train.begin(), train.end());
    c.expect(cli(args) == 0, std::string("train ") + run);
  }
  const auto a = directory_bytes(root / "a"), b = directory_bytes(root / "b");
  c.expect(a.size() == b.size() && a.size() >= 8, "same file set");
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    c.expect(it != b.end() && it->second == bytes, name + " identical");
  }
  auto out = c.outcome();
  out.detail += ", " + std::to_string(a.size()) + " files compared";
  fs::remove_all(root);
  return out;
}

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  bool gating;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 120, true, criterion_gradients},
      {2, "formula suite", 60, true, criterion_formulas},
      {3, "tabular oracle equivalence", 300, true, criterion_tiny_mdp},
      {4, "stop-gradient and routing isolation", 60, true, criterion_isolation},
      {5, "Q stability, K = 6 vs K = 1", 1200, false, criterion_q_stability},
      {6, "Q-norm ablation", 1200, false, criterion_qnorm_ablation},
      {7, "collapse-free training", 1200, true, criterion_collapse},
      {8, "OPE sanity", 60, true, criterion_ope},
      {9, "snapshot atomicity", 120, true, criterion_snapshots},
      {10, "determinism", 300, true, criterion_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  bool gating_ok = true;
  std::vector<int> directional_failed;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail
              << " [" << std::fixed << std::setprecision(1) << secs << " s, budget " << c.budget_s << " s]"
              << std::defaultfloat << std::setprecision(6) << std::endl;
    if (!o.pass) {
      if (c.gating) {
        gating_ok = false;
      } else {
        directional_failed.push_back(c.id);
      }
    }
  }
  if (!directional_failed.empty()) {
    std::cout << "note: directional criteria";
    for (int id : directional_failed) std::cout << ' ' << id;
    std::cout << " not met on the desk-scale simulator; reported, not gating" << std::endl;
  }
  return gating_ok ? 0 : 1;
}
