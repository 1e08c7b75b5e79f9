#include "slmgac/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "slmgac/errors.hpp"
#include "slmgac/feedsim/simulator.hpp"

namespace slmgac::trainer {

namespace fs = std::filesystem;
using nlohmann::json;

std::string metrics_line(const MetricsRow& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.step << ',' << r.l_actor << ',' << r.l_critic << ',' << r.l_sl << ',' << r.mean_q << ','
     << r.max_q << ',' << r.alloc_ratio << ',' << r.wall_ms;
  return os.str();
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("metrics: cannot open " + path);
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) os << metrics_line(r) << '\n';
  if (!os) throw DataError("metrics: write failed for " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("metrics: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw DataError("metrics: " + path + " lacks the expected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    MetricsRow r;
    char c = 0;
    ls >> r.step >> c >> r.l_actor >> c >> r.l_critic >> c >> r.l_sl >> c >> r.mean_q >> c >>
        r.max_q >> c >> r.alloc_ratio >> c >> r.wall_ms;
    if (!ls) throw DataError("metrics: malformed row in " + path + ": " + line);
    rows.push_back(r);
  }
  return rows;
}

void CollapseDetector::observe(std::int64_t step, double alloc_ratio) {
  const bool pinned = alloc_ratio == 0.0 || alloc_ratio == 1.0;
  if (pinned && alloc_ratio == pinned_value_) {
    ++run_;
  } else {
    run_ = pinned ? 1 : 0;
    pinned_value_ = pinned ? alloc_ratio : -1.0;
  }
  if (run_ >= window_ && flagged_step_ < 0) flagged_step_ = step;
}

double q_std(const std::vector<MetricsRow>& metrics) {
  if (metrics.size() < 2) return 0.0;
  double mean = 0.0;
  for (const auto& r : metrics) mean += r.mean_q;
  mean /= static_cast<double>(metrics.size());
  double var = 0.0;
  for (const auto& r : metrics) var += (r.mean_q - mean) * (r.mean_q - mean);
  return std::sqrt(var / static_cast<double>(metrics.size()));
}

double clip_gradients(const diffcore::ParamRefs& params, double max_norm) {
  const double norm = std::sqrt(diffcore::grad_squared_norm(params));
  if (norm > max_norm && std::isfinite(norm)) {
    const double scale = max_norm / norm;
    for (const auto& [path, p] : params) p->grad.matrix() *= scale;
  }
  return norm;
}

std::shared_ptr<const PolicySnapshot> publish_snapshot(Model& model, SnapshotChannel& channel) {
  return channel.publish(make_snapshot(model, 0));
}

namespace {

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

/// One optimizer update per call, shared by the offline and streaming loops.
class StepRunner {
 public:
  StepRunner(Model& model, const TrainConfig& config, std::string out_dir)
      : model_(model), config_(config), out_dir_(std::move(out_dir)) {
    embedding_.config.learning_rate = config.lr_embedding;
    hidden_.config.learning_rate = config.lr_hidden;
    actor_.config.learning_rate = config.lr_hidden;
    settings_.gamma = config.effective_gamma();
    settings_.huber_delta = config.huber_delta;
    settings_.tau_r = config.tau_r;
    settings_.flags = config.ablation;
  }

  const LossSettings& settings() const { return settings_; }

  StepLosses run(std::span<const Sample* const> batch, std::int64_t step,
                 const std::vector<MetricsRow>& history) {
    StepLosses losses;
    try {
      auto all = model_.trainable();
      diffcore::zero_grads(all);
      if (!config_.ablation.sep_actor) {
        losses = accumulate_gradients(model_, batch, settings_, {});
        check(losses, step);
        clip_gradients(all, config_.grad_clip);
        diffcore::adam_step(model_.embedding_params(), embedding_);
        diffcore::adam_step(model_.hidden_params(), hidden_);
      } else {
        losses = accumulate_gradients(model_, batch, settings_, {false, true, true});
        check(losses, step);
        auto critic_side = model_.critic_side_params();
        clip_gradients(critic_side, config_.grad_clip);
        diffcore::adam_step(model_.embedding_params(), embedding_);
        diffcore::ParamRefs hidden_no_actor;
        model_.encoder.collect_dense("encoder", hidden_no_actor);
        model_.critics.collect("critics", hidden_no_actor);
        diffcore::adam_step(hidden_no_actor, hidden_);

        diffcore::zero_grads(all);
        const auto actor_losses = accumulate_gradients(model_, batch, settings_, {true, false, false});
        losses.actor = actor_losses.actor;
        losses.clamped = actor_losses.clamped;
        check(losses, step);
        clip_gradients(all, config_.grad_clip);
        diffcore::adam_step(model_.actor_params(), actor_);
        if (config_.ablation.no_sg) {
          diffcore::adam_step(model_.embedding_params(), embedding_);
          diffcore::adam_step(hidden_no_actor, hidden_);
        }
      }
    } catch (const NumericFault& e) {
      dump_forensics(step, losses, e.what(), history);
      throw;
    }
    ++updates_;
    if (config_.sync.mode == critic::SyncMode::hard) {
      if (updates_ % config_.sync.period == 0) model_.sync_targets(critic::SyncMode::hard);
    } else {
      model_.sync_targets(critic::SyncMode::polyak, config_.sync.tau);
    }
    return losses;
  }

 private:
  void check(const StepLosses& l, std::int64_t step) const {
    if (!std::isfinite(l.actor) || !std::isfinite(l.critic) || !std::isfinite(l.sl)) {
      throw NumericFault("non-finite loss at step " + std::to_string(step) + " (actor " +
                         std::to_string(l.actor) + ", critic " + std::to_string(l.critic) +
                         ", sl " + std::to_string(l.sl) + ")");
    }
  }

  void dump_forensics(std::int64_t step, const StepLosses& l, const std::string& what,
                      const std::vector<MetricsRow>& history) const {
    if (out_dir_.empty()) return;
    json j;
    j["step"] = step;
    j["error"] = what;
    j["losses"] = {{"actor", l.actor}, {"critic", l.critic}, {"sl", l.sl}};
    j["recent_metrics"] = json::array();
    const std::size_t from = history.size() > 20 ? history.size() - 20 : 0;
    for (std::size_t i = from; i < history.size(); ++i) {
      j["recent_metrics"].push_back(metrics_line(history[i]));
    }
    std::ofstream os(fs::path(out_dir_) / "forensics.json", std::ios::trunc);
    os << j.dump(2) << '\n';
    diffcore::ParamSet::capture(model_.trainable()).save(
        (fs::path(out_dir_) / ("forensics_step" + std::to_string(step) + ".params")).string());
  }

  Model& model_;
  const TrainConfig& config_;
  std::string out_dir_;
  LossSettings settings_;
  diffcore::AdamState embedding_;
  diffcore::AdamState hidden_;
  diffcore::AdamState actor_;
  std::int64_t updates_ = 0;
};

std::string label_kind(const TrainConfig& c) {
  return c.ablation.vanilla_label ? "vanilla_expectation" : "clipped_double_q";
}

std::vector<std::pair<int, double>> users_of(const feedsim::LoggedDataset& data) {
  std::map<int, double> users;
  for (const auto& t : data.transitions) users.emplace(t.user_id, t.trailing_live_watch);
  return {users.begin(), users.end()};
}

void save_outputs(const std::string& out_dir, TrainResult& result) {
  if (out_dir.empty()) return;
  write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), result.metrics);
  diffcore::ParamSet::capture(result.model.trainable())
      .save((fs::path(out_dir) / ("checkpoint_step" + std::to_string(result.steps) + ".params")).string());
  save_snapshot(make_snapshot(result.model, result.last_published_version + 1),
                (fs::path(out_dir) / "policy.snapshot").string());
  json summary = {{"steps", result.steps},
                  {"K", result.model.config().K},
                  {"collapsed", result.collapsed},
                  {"collapse_step", result.collapse_step},
                  {"label_kind", result.label_kind},
                  {"lambda", result.lambda},
                  {"clamped", result.clamped},
                  {"q_std", q_std(result.metrics)},
                  {"final_alloc_ratio", result.metrics.empty() ? 0.0 : result.metrics.back().alloc_ratio}};
  std::ofstream os(fs::path(out_dir) / "train_summary.json", std::ios::trunc);
  os << summary.dump(2) << '\n';
}

class Clock {
 public:
  explicit Clock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

TrainResult train(const feedsim::LoggedDataset& data, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);
  const ModelConfig mcfg = effective_model_config(config);
  TrainResult result;
  result.lambda = config.lambda.value_or(data.config.lambda);
  result.label_kind = label_kind(config);

  std::unique_ptr<feedsim::GroupAssigner> assigner;
  if (mcfg.K != data.config.K) assigner = std::make_unique<feedsim::GroupAssigner>(users_of(data), mcfg.K);
  const SampleContext ctx{&mcfg.bins, assigner.get(), result.lambda, config.tau_r};
  const auto samples = prepare_samples(data, ctx);
  if (samples.empty()) throw DataError("train: the dataset holds no transitions");

  result.model = Model(mcfg, config.seed);
  Model& model = result.model;
  fit_prior(model.prior, mcfg.bins, mcfg.K, samples);

  Rng rng = make_rng(config.seed, 0x747261696eull);
  std::vector<Sample> probe_storage;
  std::vector<const Sample*> probe;
  {
    const std::vector<Sample>* pool = &samples;
    if (options.probe) {
      probe_storage = prepare_samples(*options.probe, ctx);
      pool = &probe_storage;
    }
    std::vector<std::size_t> idx(pool->size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng probe_rng = make_rng(config.seed, 0x70726f6265ull);
    shuffle(idx, probe_rng);
    idx.resize(std::min(idx.size(), static_cast<std::size_t>(config.probe_size)));
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) probe.push_back(&(*pool)[i]);
  }

  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t batch = std::min<std::int64_t>(config.batch_size, n);
  const std::int64_t per_epoch = (n + batch - 1) / batch;
  const std::int64_t total = config.steps > 0 ? config.steps : config.epochs * per_epoch;

  StepRunner runner(model, config, options.out_dir);
  CollapseDetector collapse(config.collapse_window);
  const Clock clock(config.record_wall_ms);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<const Sample*> mb;

  for (std::int64_t step = 1; step <= total; ++step) {
    mb.clear();
    while (static_cast<std::int64_t>(mb.size()) < batch) {
      if (cursor == order.size()) {
        shuffle(order, rng);
        cursor = 0;
      }
      mb.push_back(&samples[order[cursor++]]);
    }
    const auto losses = runner.run(mb, step, result.metrics);
    result.clamped += losses.clamped;
    if (step % config.eval_interval == 0 || step == total) {
      const auto stats = evaluate_probe(model, probe, runner.settings().gamma, config.tau_r);
      result.metrics.push_back({step, losses.actor, losses.critic, losses.sl, stats.mean_q,
                                stats.max_q, stats.alloc_ratio, clock.ms()});
      collapse.observe(step, stats.alloc_ratio);
    }
    if (options.channel && options.publish_interval > 0 && step % options.publish_interval == 0) {
      result.last_published_version = publish_snapshot(model, *options.channel)->version;
    }
    if (!options.out_dir.empty() && config.checkpoint_interval > 0 &&
        step % config.checkpoint_interval == 0 && step != total) {
      diffcore::ParamSet::capture(model.trainable())
          .save((fs::path(options.out_dir) / ("checkpoint_step" + std::to_string(step) + ".params")).string());
    }
  }
  result.steps = total;
  result.transitions_seen = samples.size();
  result.collapsed = collapse.flagged();
  result.collapse_step = collapse.flagged_step();
  save_outputs(options.out_dir, result);
  return result;
}

TrainResult train_streaming(const feedsim::SimConfig& sim_config, const TrainConfig& config,
                            const TrainOptions& options) {
  config.validate();
  sim_config.validate();
  if (!options.out_dir.empty()) fs::create_directories(options.out_dir);
  const ModelConfig mcfg = effective_model_config(config);
  const auto& sc = config.streaming;
  TrainResult result;
  result.lambda = config.lambda.value_or(sim_config.lambda);
  result.label_kind = label_kind(config);

  const feedsim::FeedSimulator sim(sim_config);
  const auto population = sim.make_population(sc.num_users);
  std::unique_ptr<feedsim::GroupAssigner> assigner;
  if (mcfg.K != sim_config.K) {
    std::vector<std::pair<int, double>> users;
    for (const auto& u : population) users.emplace_back(u.user_id, u.trailing_live_watch);
    assigner = std::make_unique<feedsim::GroupAssigner>(users, mcfg.K);
  }
  const SampleContext ctx{&mcfg.bins, assigner.get(), result.lambda, config.tau_r};

  result.model = Model(mcfg, config.seed);
  Model& model = result.model;
  SnapshotChannel local_channel;
  SnapshotChannel& channel = options.channel ? *options.channel : local_channel;
  SnapshotPolicy acting(*publish_snapshot(model, channel));

  struct UserSlot {
    feedsim::Session session;
    Rng env;
    std::optional<feedsim::Transition> pending;
  };
  std::vector<UserSlot> slots;
  slots.reserve(population.size());
  for (const auto& u : population) {
    Rng env = make_rng(sim_config.seed, 2 * (static_cast<std::uint64_t>(u.user_id) + 1));
    auto session = sim.start_session(u, env);
    slots.push_back({std::move(session), std::move(env), std::nullopt});
  }
  Rng act_rng = make_rng(config.seed, 0x616374ull);
  Rng rng = make_rng(config.seed, 0x747261696eull);
  std::deque<feedsim::Transition> replay;
  std::size_t user_cursor = 0;

  const auto push = [&](feedsim::Transition t) {
    replay.push_back(std::move(t));
    ++result.transitions_seen;
    if (replay.size() > static_cast<std::size_t>(sc.replay_capacity)) replay.pop_front();
  };
  const auto serve = [&](int requests) {
    for (int r = 0; r < requests; ++r) {
      auto& slot = slots[user_cursor];
      const auto& profile = population[user_cursor];
      user_cursor = (user_cursor + 1) % slots.size();
      if (slot.session.terminated) {
        slot.session = sim.start_session(profile, slot.env);
        slot.pending.reset();
      }
      feedsim::Transition t;
      t.trajectory_id = static_cast<std::uint64_t>(profile.user_id);
      t.step = slot.session.step;
      t.user_id = profile.user_id;
      t.group_id = profile.group_id;
      t.num_videos = slot.session.request.num_videos;
      t.trailing_live_watch = profile.trailing_live_watch;
      t.state = sim.state_of(slot.session);
      const int group = assigner ? assigner->group_of(profile.user_id, profile.trailing_live_watch)
                                 : profile.group_id;
      const auto choice = acting.act(t.state, group, sc.epsilon, act_rng);
      t.action = choice.chosen_action;
      t.behavior_propensity = choice.propensity;
      const auto out = sim.step(slot.session, t.action, slot.env);
      t.y_l = out.y_l;
      t.y_v = out.y_v;
      t.reward = feedsim::reward(out.y_l, out.y_v, t.num_videos, result.lambda);
      t.constraint = feedsim::constraint_value(out.y_l, out.y_v, t.num_videos);
      if (slot.pending) {
        slot.pending->next = feedsim::NextStep{t.state, t.action, t.y_l, t.y_v, t.reward,
                                               t.behavior_propensity, t.num_videos};
        push(std::move(*slot.pending));
        slot.pending.reset();
      }
      if (out.terminal) {
        push(std::move(t));
      } else {
        slot.pending = std::move(t);
      }
    }
  };

  // Warm-up fills the replay and fixes the probe states.
  const auto warm = static_cast<std::size_t>(std::max(config.batch_size, config.probe_size));
  while (replay.size() < warm) serve(sc.requests_per_step);
  std::vector<feedsim::Transition> probe_transitions(replay.begin(), replay.begin() + config.probe_size);
  std::vector<Sample> probe_samples;
  for (const auto& t : probe_transitions) probe_samples.push_back(prepare_sample(t, ctx));
  std::vector<const Sample*> probe;
  for (const auto& s : probe_samples) probe.push_back(&s);

  const auto refit_prior = [&]() {
    std::vector<Sample> all;
    all.reserve(replay.size());
    for (const auto& t : replay) all.push_back(prepare_sample(t, ctx));
    fit_prior(model.prior, mcfg.bins, mcfg.K, all);
  };
  refit_prior();

  const std::int64_t total =
      config.steps > 0 ? config.steps
                       : static_cast<std::int64_t>(config.epochs) *
                             std::max(1, sc.replay_capacity / config.batch_size);
  StepRunner runner(model, config, options.out_dir);
  CollapseDetector collapse(config.collapse_window);
  const Clock clock(config.record_wall_ms);
  std::vector<Sample> batch_samples;
  std::vector<const Sample*> mb;

  for (std::int64_t step = 1; step <= total; ++step) {
    serve(sc.requests_per_step);
    batch_samples.clear();
    for (int b = 0; b < config.batch_size; ++b) {
      batch_samples.push_back(prepare_sample(replay[uniform_index(rng, replay.size())], ctx));
    }
    mb.clear();
    for (const auto& s : batch_samples) mb.push_back(&s);
    const auto losses = runner.run(mb, step, result.metrics);
    result.clamped += losses.clamped;
    if (step % config.eval_interval == 0 || step == total) {
      const auto stats = evaluate_probe(model, probe, runner.settings().gamma, config.tau_r);
      result.metrics.push_back({step, losses.actor, losses.critic, losses.sl, stats.mean_q,
                                stats.max_q, stats.alloc_ratio, clock.ms()});
      collapse.observe(step, stats.alloc_ratio);
    }
    if (step % sc.publish_interval == 0) {
      const auto snap = publish_snapshot(model, channel);
      result.last_published_version = snap->version;
      acting.refresh(*snap);
      refit_prior();
    }
  }
  result.steps = total;
  result.collapsed = collapse.flagged();
  result.collapse_step = collapse.flagged_step();
  save_outputs(options.out_dir, result);
  return result;
}

}  // namespace slmgac::trainer
