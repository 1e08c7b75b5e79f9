#include "slmgac/feedsim/simulator.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "slmgac/errors.hpp"

namespace slmgac::feedsim {

namespace {

constexpr std::size_t kRecentWindow = 5;
constexpr std::uint64_t kPopulationStream = 1'000'000'000ull;

double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

int uniform_int(Rng& rng, int n) { return static_cast<int>(uniform01(rng) * n) % n; }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clip_watch(double y) { return std::clamp(y, 0.0, kMaxWatchSeconds); }

template <typename T>
void push_bounded(std::deque<T>& d, T v, std::size_t cap) {
  d.push_back(v);
  while (d.size() > cap) d.pop_front();
}

}  // namespace

void SimConfig::validate() const {
  if (K < 1) throw ConfigError("sim: K must be >= 1");
  if (B < 1 || B >= 10) throw ConfigError("sim: B must satisfy 1 <= B < 10");
  if (lambda < 0.0) throw ConfigError("sim: lambda must be >= 0");
  if (tier_affinity_mean.empty() || tier_affinity_mean.size() != tier_affinity_spread.size()) {
    throw ConfigError("sim: tier affinity means and spreads must be non-empty and equal length");
  }
  for (double s : tier_affinity_spread) {
    if (s < 0.0) throw ConfigError("sim: tier affinity spread must be >= 0");
  }
  if (fatigue_gain < 0.0 || fatigue_decay < 0.0 || fatigue_decay > 1.0) {
    throw ConfigError("sim: fatigue gain >= 0 and decay in [0, 1] required");
  }
  if (termination_base < 0.0 || termination_base > 1.0 || termination_fatigue < 0.0) {
    throw ConfigError("sim: termination base in [0, 1] and fatigue coefficient >= 0 required");
  }
  if (tod_period_steps < 1) throw ConfigError("sim: tod_period_steps must be >= 1");
  if (live_log_sigma < 0.0 || video_log_sigma < 0.0) throw ConfigError("sim: negative sigma");
  if (video_injection_factor <= 0.0 || video_injection_factor > 1.0) {
    throw ConfigError("sim: video_injection_factor must be in (0, 1]");
  }
  if (num_lives < 1 || num_authors < 1 || num_videos < 1 || history_init_max < 0) {
    throw ConfigError("sim: catalogue sizes must be positive");
  }
  if (behavior_min <= 0.0 || behavior_max >= 1.0 || behavior_min > behavior_max) {
    throw ConfigError("sim: behavior probabilities must satisfy 0 < min <= max < 1");
  }
}

double reward(double y_l, double y_v, int B, double lambda) {
  if (B <= 0) throw ConfigError("reward: B must be >= 1");
  return y_l - (lambda / B) * y_v;
}

double penalized_reward(double y_l, double y_v, int B, double lambda) {
  if (B <= 0) throw ConfigError("penalized_reward: B must be >= 1");
  return (1.0 + lambda) * y_l - (lambda / B) * y_v;
}

double constraint_value(double y_l, double y_v, int B) {
  if (B <= 0) throw ConfigError("constraint_value: B must be >= 1");
  return y_v / B - y_l;
}

void assign_groups(std::vector<UserProfile>& population, int K) {
  if (K < 1) throw ConfigError("assign_groups: K must be >= 1");
  if (static_cast<std::size_t>(K) > population.size()) {
    throw ConfigError("assign_groups: K = " + std::to_string(K) + " exceeds population size " +
                      std::to_string(population.size()));
  }
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ua = population[a];
    const auto& ub = population[b];
    if (ua.trailing_live_watch != ub.trailing_live_watch) {
      return ua.trailing_live_watch < ub.trailing_live_watch;
    }
    return ua.user_id < ub.user_id;
  });
  const std::size_t n = population.size();
  for (std::size_t rank = 0; rank < n; ++rank) {
    population[order[rank]].group_id = static_cast<int>(rank * static_cast<std::size_t>(K) / n);
  }
}

GroupAssigner::GroupAssigner(const std::vector<std::pair<int, double>>& users, int K) : K_(K) {
  std::vector<UserProfile> population(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) {
    population[i].user_id = users[i].first;
    population[i].trailing_live_watch = users[i].second;
  }
  assign_groups(population, K);
  lower_.assign(static_cast<std::size_t>(K), std::numeric_limits<double>::infinity());
  for (const auto& u : population) {
    auto& lo = lower_[static_cast<std::size_t>(u.group_id)];
    lo = std::min(lo, u.trailing_live_watch);
    known_.emplace_back(u.user_id, u.group_id);
  }
  std::sort(known_.begin(), known_.end());
}

int GroupAssigner::group_of(int user_id, double trailing_live_watch) const {
  auto it = std::lower_bound(known_.begin(), known_.end(), std::make_pair(user_id, INT_MIN));
  if (it != known_.end() && it->first == user_id) return it->second;
  int g = 0;
  for (int k = 1; k < K_; ++k) {
    if (trailing_live_watch >= lower_[static_cast<std::size_t>(k)]) g = k;
  }
  return g;
}

BehaviorPolicy group_heuristic_policy(const SimConfig& config) {
  const int K = config.K;
  const double lo = config.behavior_min;
  const double hi = config.behavior_max;
  return {"group_heuristic", [K, lo, hi](const Session& s) {
            if (K == 1) return 0.5 * (lo + hi);
            return lo + (hi - lo) * static_cast<double>(s.user.group_id) / (K - 1);
          }};
}

BehaviorPolicy uniform_policy() {
  return {"uniform", [](const Session&) { return 0.5; }};
}

BehaviorPolicy always_inject_policy() {
  return {"always_inject", [](const Session&) { return 1.0; }};
}

BehaviorPolicy never_inject_policy() {
  return {"never_inject", [](const Session&) { return 0.0; }};
}

FeedSimulator::FeedSimulator(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  Rng rng = make_rng(config_.seed, 0);
  authors_.resize(config_.num_authors);
  for (auto& a : authors_) {
    a.quality = uniform01(rng);
    a.gender = uniform01(rng) < 0.5 ? 0 : 1;
  }
  lives_.resize(config_.num_lives);
  for (auto& l : lives_) {
    l.author_id = uniform_int(rng, config_.num_authors);
    l.base_viewers = std::exp(4.0 + 2.5 * authors_[l.author_id].quality + 0.7 * normal(rng));
  }
}

std::vector<UserProfile> FeedSimulator::make_population(int num_users) const {
  std::vector<UserProfile> users(num_users);
  const int tiers = static_cast<int>(config_.tier_affinity_mean.size());
  for (int u = 0; u < num_users; ++u) {
    Rng rng = make_rng(config_.seed, kPopulationStream + static_cast<std::uint64_t>(u));
    auto& user = users[u];
    user.user_id = u;
    user.tier = uniform_int(rng, tiers);
    user.live_affinity = config_.tier_affinity_mean[user.tier] +
                         config_.tier_affinity_spread[user.tier] * normal(rng);
    // Three weeks of daily exposure; noisy but monotone in affinity.
    user.trailing_live_watch =
        21.0 * std::exp(config_.live_log_base + 1.5 * user.live_affinity + 0.4 * normal(rng));
    user.static_feature_ids = {feature_id(Field::user, static_cast<std::uint64_t>(u))};
  }
  assign_groups(users, config_.K);
  return users;
}

Request FeedSimulator::make_request(const Session& session, int timestamp, Rng& rng) const {
  Request r;
  r.timestamp = timestamp;
  r.num_videos = config_.B;
  const double period = static_cast<double>(config_.tod_period_steps);
  r.time_of_day_phase = std::fmod(static_cast<double>(timestamp), period) / period;
  const int live_id = uniform_int(rng, config_.num_lives);
  const auto& live = lives_[live_id];
  const auto& author = authors_[live.author_id];
  r.live.live_id = live_id;
  r.live.author_id = live.author_id;
  r.live.author_quality = author.quality;
  r.live.author_gender = author.gender;
  // Live supply and audiences swing over the day.
  const double tod = 1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * r.time_of_day_phase);
  r.live.viewer_count = static_cast<int>(live.base_viewers * tod);
  r.video_ids.resize(config_.B);
  for (auto& v : r.video_ids) v = uniform_int(rng, config_.num_videos);
  (void)session;
  return r;
}

Session FeedSimulator::start_session(const UserProfile& user, Rng& rng) const {
  Session s;
  s.user = user;
  s.user.fatigue = 0.0;
  s.user.live_history.clear();
  s.user.video_history.clear();
  s.user.recent_actions.clear();
  const int n_live = uniform_int(rng, config_.history_init_max + 1);
  const int n_video = uniform_int(rng, config_.history_init_max + 1);
  for (int i = 0; i < n_live; ++i) {
    s.user.live_history.push_back(static_cast<std::uint64_t>(uniform_int(rng, config_.num_lives)));
  }
  for (int i = 0; i < n_video; ++i) {
    s.user.video_history.push_back(
        static_cast<std::uint64_t>(uniform_int(rng, config_.num_videos)));
  }
  const int start = uniform_int(rng, config_.tod_period_steps);
  s.request = make_request(s, start, rng);
  return s;
}

double FeedSimulator::live_log_mean(const Session& session) const {
  const auto& u = session.user;
  const double tod = config_.tod_amplitude *
                     std::sin(2.0 * std::numbers::pi * session.request.time_of_day_phase);
  return config_.live_log_base + u.live_affinity +
         config_.live_quality_coef * (session.request.live.author_quality - 0.5) -
         config_.live_fatigue_coef * u.fatigue + tod;
}

StepOutcome FeedSimulator::step(Session& session, int action, Rng& rng) const {
  if (session.terminated) throw ContractError("step: session already terminated");
  if (action != 0 && action != 1) throw ContractError("step: action must be 0 or 1");
  auto& user = session.user;
  const auto& req = session.request;

  // Draw every variate unconditionally so the stream position does not depend
  // on the action taken.
  const double watch_draw = uniform01(rng);
  const double live_noise = normal(rng);
  const double video_noise = normal(rng);
  const double end_draw = uniform01(rng);

  StepOutcome out;
  if (action == 1) {
    const double p_watch =
        logistic(config_.live_watch_bias + config_.live_watch_affinity * user.live_affinity);
    if (watch_draw < p_watch) {
      out.y_l = clip_watch(std::exp(live_log_mean(session) + config_.live_log_sigma * live_noise));
    }
  }
  double video_mu = std::log(static_cast<double>(req.num_videos)) + config_.video_log_base -
                    config_.video_fatigue_coef * user.fatigue;
  if (action == 1) video_mu += std::log(config_.video_injection_factor);
  out.y_v = clip_watch(std::exp(video_mu + config_.video_log_sigma * video_noise));

  if (action == 1) {
    user.fatigue += config_.fatigue_gain;
    if (out.y_l > 0.0) {
      push_bounded(user.live_history, static_cast<std::uint64_t>(req.live.live_id),
                   encoder::kMaxHistory);
    }
  } else {
    user.fatigue *= config_.fatigue_decay;
  }
  for (int v : req.video_ids) {
    push_bounded(user.video_history, static_cast<std::uint64_t>(v), encoder::kMaxHistory);
  }
  push_bounded(user.recent_actions, action, kRecentWindow);

  const double p_end =
      std::min(1.0, config_.termination_base + config_.termination_fatigue * user.fatigue);
  ++session.step;
  if (end_draw < p_end) {
    session.terminated = true;
    out.terminal = true;
  } else {
    session.request = make_request(session, req.timestamp + 1, rng);
  }
  return out;
}

encoder::StateFeatures FeedSimulator::state_of(const Session& session) const {
  const auto& u = session.user;
  const auto& r = session.request;
  encoder::StateFeatures s;
  const auto injections = static_cast<std::uint64_t>(
      std::count(u.recent_actions.begin(), u.recent_actions.end(), 1));
  const auto hour = static_cast<std::uint64_t>(r.time_of_day_phase * 24.0);
  s.user_static_ids = u.static_feature_ids;
  s.user_static_ids.push_back(feature_id(Field::recent_injections, injections));
  s.user_static_ids.push_back(feature_id(Field::hour, hour));
  const auto viewer_bucket =
      static_cast<std::uint64_t>(std::log2(1.0 + static_cast<double>(r.live.viewer_count)));
  s.live_item_ids = {feature_id(Field::live, static_cast<std::uint64_t>(r.live.live_id)),
                     feature_id(Field::author, static_cast<std::uint64_t>(r.live.author_id)),
                     feature_id(Field::viewer_bucket, viewer_bucket),
                     feature_id(Field::author_gender,
                                static_cast<std::uint64_t>(r.live.author_gender))};
  for (auto id : u.live_history) s.live_history_ids.push_back(feature_id(Field::live, id));
  for (auto id : u.video_history) s.video_history_ids.push_back(feature_id(Field::video, id));
  s.group_id = u.group_id;
  return s;
}

}  // namespace slmgac::feedsim
