#include "slmgac/feedsim/log.hpp"

#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "slmgac/errors.hpp"

namespace slmgac::feedsim {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) it->get_to(field);
}

}  // namespace

void to_json(json& j, const SimConfig& c) {
  j = json{{"K", c.K},
           {"B", c.B},
           {"lambda", c.lambda},
           {"tier_affinity_mean", c.tier_affinity_mean},
           {"tier_affinity_spread", c.tier_affinity_spread},
           {"fatigue_gain", c.fatigue_gain},
           {"fatigue_decay", c.fatigue_decay},
           {"termination_base", c.termination_base},
           {"termination_fatigue", c.termination_fatigue},
           {"tod_amplitude", c.tod_amplitude},
           {"tod_period_steps", c.tod_period_steps},
           {"live_log_base", c.live_log_base},
           {"live_log_sigma", c.live_log_sigma},
           {"live_quality_coef", c.live_quality_coef},
           {"live_fatigue_coef", c.live_fatigue_coef},
           {"live_watch_bias", c.live_watch_bias},
           {"live_watch_affinity", c.live_watch_affinity},
           {"video_log_base", c.video_log_base},
           {"video_log_sigma", c.video_log_sigma},
           {"video_injection_factor", c.video_injection_factor},
           {"video_fatigue_coef", c.video_fatigue_coef},
           {"num_lives", c.num_lives},
           {"num_authors", c.num_authors},
           {"num_videos", c.num_videos},
           {"history_init_max", c.history_init_max},
           {"behavior_min", c.behavior_min},
           {"behavior_max", c.behavior_max},
           {"seed", c.seed}};
}

void from_json(const json& j, SimConfig& c) {
  read_opt(j, "K", c.K);
  read_opt(j, "B", c.B);
  read_opt(j, "lambda", c.lambda);
  read_opt(j, "tier_affinity_mean", c.tier_affinity_mean);
  read_opt(j, "tier_affinity_spread", c.tier_affinity_spread);
  read_opt(j, "fatigue_gain", c.fatigue_gain);
  read_opt(j, "fatigue_decay", c.fatigue_decay);
  read_opt(j, "termination_base", c.termination_base);
  read_opt(j, "termination_fatigue", c.termination_fatigue);
  read_opt(j, "tod_amplitude", c.tod_amplitude);
  read_opt(j, "tod_period_steps", c.tod_period_steps);
  read_opt(j, "live_log_base", c.live_log_base);
  read_opt(j, "live_log_sigma", c.live_log_sigma);
  read_opt(j, "live_quality_coef", c.live_quality_coef);
  read_opt(j, "live_fatigue_coef", c.live_fatigue_coef);
  read_opt(j, "live_watch_bias", c.live_watch_bias);
  read_opt(j, "live_watch_affinity", c.live_watch_affinity);
  read_opt(j, "video_log_base", c.video_log_base);
  read_opt(j, "video_log_sigma", c.video_log_sigma);
  read_opt(j, "video_injection_factor", c.video_injection_factor);
  read_opt(j, "video_fatigue_coef", c.video_fatigue_coef);
  read_opt(j, "num_lives", c.num_lives);
  read_opt(j, "num_authors", c.num_authors);
  read_opt(j, "num_videos", c.num_videos);
  read_opt(j, "history_init_max", c.history_init_max);
  read_opt(j, "behavior_min", c.behavior_min);
  read_opt(j, "behavior_max", c.behavior_max);
  read_opt(j, "seed", c.seed);
}

std::vector<std::pair<std::size_t, std::size_t>> LoggedDataset::trajectories() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= transitions.size(); ++i) {
    if (i == transitions.size() || transitions[i].trajectory_id != transitions[begin].trajectory_id) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  return out;
}

namespace {

struct RawStep {
  encoder::StateFeatures state;
  int action = 0;
  double y_l = 0.0;
  double y_v = 0.0;
  double propensity = 1.0;
  int num_videos = 6;
  bool terminal = false;
};

std::vector<Transition> run_user(const FeedSimulator& sim, const UserProfile& user,
                                 const BehaviorPolicy& policy, int steps) {
  const auto& cfg = sim.config();
  const auto stream = 2 * (static_cast<std::uint64_t>(user.user_id) + 1);
  Rng env_rng = make_rng(cfg.seed, stream);
  Rng policy_rng = make_rng(cfg.seed, stream + 1);

  std::vector<RawStep> raw;
  if (steps <= 0) return {};
  Session session = sim.start_session(user, env_rng);
  while (!session.terminated && static_cast<int>(raw.size()) < steps + 1) {
    RawStep r;
    r.state = sim.state_of(session);
    r.num_videos = session.request.num_videos;
    const double p1 = policy.inject_probability(session);
    if (!(p1 >= 0.0 && p1 <= 1.0)) {
      throw DataError("behavior policy " + policy.name + " returned probability " +
                      std::to_string(p1));
    }
    r.action = uniform01(policy_rng) < p1 ? 1 : 0;
    r.propensity = r.action == 1 ? p1 : 1.0 - p1;
    if (r.propensity <= 0.0) {
      throw DataError("behavior policy " + policy.name + " took action " +
                      std::to_string(r.action) + " with propensity 0 (user " +
                      std::to_string(user.user_id) + ", step " + std::to_string(raw.size()) + ")");
    }
    const auto out = sim.step(session, r.action, env_rng);
    r.y_l = out.y_l;
    r.y_v = out.y_v;
    r.terminal = out.terminal;
    raw.push_back(std::move(r));
  }

  const bool truncated = !raw.back().terminal;
  const std::size_t kept = truncated ? raw.size() - 1 : raw.size();
  std::vector<Transition> out;
  out.reserve(kept);
  for (std::size_t i = 0; i < kept; ++i) {
    const auto& r = raw[i];
    Transition t;
    t.trajectory_id = static_cast<std::uint64_t>(user.user_id);
    t.step = static_cast<int>(i);
    t.user_id = user.user_id;
    t.group_id = user.group_id;
    t.num_videos = r.num_videos;
    t.trailing_live_watch = user.trailing_live_watch;
    t.state = r.state;
    t.action = r.action;
    t.y_l = r.y_l;
    t.y_v = r.y_v;
    t.reward = reward(r.y_l, r.y_v, r.num_videos, cfg.lambda);
    t.constraint = constraint_value(r.y_l, r.y_v, r.num_videos);
    t.behavior_propensity = r.propensity;
    if (i + 1 < raw.size()) {
      const auto& n = raw[i + 1];
      t.next = NextStep{n.state, n.action, n.y_l, n.y_v,
                        reward(n.y_l, n.y_v, n.num_videos, cfg.lambda), n.propensity,
                        n.num_videos};
    }
    out.push_back(std::move(t));
  }
  return out;
}

ordered_json state_json(const encoder::StateFeatures& s) {
  ordered_json j;
  j["user_static_ids"] = s.user_static_ids;
  j["live_item_ids"] = s.live_item_ids;
  j["live_history_ids"] = s.live_history_ids;
  j["video_history_ids"] = s.video_history_ids;
  j["group_id"] = s.group_id;
  return j;
}

encoder::StateFeatures parse_state(const json& j) {
  encoder::StateFeatures s;
  j.at("user_static_ids").get_to(s.user_static_ids);
  j.at("live_item_ids").get_to(s.live_item_ids);
  j.at("live_history_ids").get_to(s.live_history_ids);
  j.at("video_history_ids").get_to(s.video_history_ids);
  j.at("group_id").get_to(s.group_id);
  if (s.live_history_ids.size() > encoder::kMaxHistory ||
      s.video_history_ids.size() > encoder::kMaxHistory) {
    throw DataError("log: history longer than " + std::to_string(encoder::kMaxHistory));
  }
  return s;
}

ordered_json header_json(const SimConfig& config, const std::string& policy, int users,
                         int steps) {
  ordered_json h;
  h["type"] = "header";
  h["schema"] = kLogSchemaName;
  h["schema_version"] = kLogSchemaVersion;
  json cfg = config;
  h["sim_config"] = ordered_json::parse(cfg.dump());
  h["behavior_policy"] = policy;
  h["num_users"] = users;
  h["steps"] = steps;
  return h;
}

}  // namespace

std::string transition_line(const Transition& t) {
  ordered_json j;
  j["type"] = "transition";
  j["trajectory_id"] = t.trajectory_id;
  j["step"] = t.step;
  j["user_id"] = t.user_id;
  j["group_id"] = t.group_id;
  j["num_videos"] = t.num_videos;
  j["trailing_live_watch"] = t.trailing_live_watch;
  j["state"] = state_json(t.state);
  j["action"] = t.action;
  j["y_l"] = t.y_l;
  j["y_v"] = t.y_v;
  j["reward"] = t.reward;
  j["constraint"] = t.constraint;
  j["behavior_propensity"] = t.behavior_propensity;
  if (t.next) {
    ordered_json n;
    n["state"] = state_json(t.next->state);
    n["action"] = t.next->action;
    n["y_l"] = t.next->y_l;
    n["y_v"] = t.next->y_v;
    n["reward"] = t.next->reward;
    n["behavior_propensity"] = t.next->behavior_propensity;
    n["num_videos"] = t.next->num_videos;
    j["next"] = std::move(n);
  } else {
    j["next"] = nullptr;
  }
  return j.dump();
}

namespace {

Transition parse_transition_json(const json& j) {
  if (j.at("type") != "transition") throw DataError("log: expected a transition record");
  Transition t;
  j.at("trajectory_id").get_to(t.trajectory_id);
  j.at("step").get_to(t.step);
  j.at("user_id").get_to(t.user_id);
  j.at("group_id").get_to(t.group_id);
  j.at("num_videos").get_to(t.num_videos);
  j.at("trailing_live_watch").get_to(t.trailing_live_watch);
  t.state = parse_state(j.at("state"));
  j.at("action").get_to(t.action);
  j.at("y_l").get_to(t.y_l);
  j.at("y_v").get_to(t.y_v);
  j.at("reward").get_to(t.reward);
  j.at("constraint").get_to(t.constraint);
  j.at("behavior_propensity").get_to(t.behavior_propensity);
  if (!j.at("next").is_null()) {
    const auto& n = j.at("next");
    NextStep next;
    next.state = parse_state(n.at("state"));
    n.at("action").get_to(next.action);
    n.at("y_l").get_to(next.y_l);
    n.at("y_v").get_to(next.y_v);
    n.at("reward").get_to(next.reward);
    n.at("behavior_propensity").get_to(next.behavior_propensity);
    n.at("num_videos").get_to(next.num_videos);
    t.next = std::move(next);
  }
  if (t.action != 0 && t.action != 1) throw DataError("log: action must be 0 or 1");
  if (!(t.behavior_propensity > 0.0 && t.behavior_propensity <= 1.0)) {
    throw DataError("log: behavior propensity outside (0, 1] in trajectory " +
                    std::to_string(t.trajectory_id) + " step " + std::to_string(t.step));
  }
  return t;
}

}  // namespace

Transition parse_transition(const std::string& line) {
  try {
    return parse_transition_json(json::parse(line));
  } catch (const json::exception& e) {
    throw DataError(std::string("log: bad transition record: ") + e.what());
  }
}

LoggedDataset simulate(const SimConfig& config, const BehaviorPolicy& policy, int num_users,
                       int steps) {
  FeedSimulator sim(config);
  LoggedDataset data;
  data.config = config;
  data.behavior_policy = policy.name;
  data.num_users = num_users;
  data.steps = steps;
  for (const auto& user : sim.make_population(num_users)) {
    auto traj = run_user(sim, user, policy, steps);
    std::move(traj.begin(), traj.end(), std::back_inserter(data.transitions));
  }
  return data;
}

void generate_log(const SimConfig& config, const BehaviorPolicy& policy, int num_users, int steps,
                  std::ostream& out) {
  FeedSimulator sim(config);
  const auto population = sim.make_population(num_users);
  out << header_json(config, policy.name, num_users, steps).dump() << '\n';
  for (const auto& user : population) {
    for (const auto& t : run_user(sim, user, policy, steps)) out << transition_line(t) << '\n';
  }
  if (!out) throw DataError("log: write failed");
}

void generate_log(const SimConfig& config, const BehaviorPolicy& policy, int num_users, int steps,
                  const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("log: cannot open " + path + " for writing");
  generate_log(config, policy, num_users, steps, os);
}

void generate_log(const SimConfig& config, const BehaviorPolicy& policy, int num_users, int steps,
                  int holdout_every, std::ostream& all, std::ostream& train, std::ostream& test) {
  if (holdout_every < 2) throw ConfigError("split: holdout_every must be >= 2");
  FeedSimulator sim(config);
  const auto population = sim.make_population(num_users);
  const int test_users = num_users / holdout_every;
  all << header_json(config, policy.name, num_users, steps).dump() << '\n';
  train << header_json(config, policy.name, num_users - test_users, steps).dump() << '\n';
  test << header_json(config, policy.name, test_users, steps).dump() << '\n';
  int k = 0;
  for (const auto& user : population) {
    auto& dst = (k++ % holdout_every == holdout_every - 1) ? test : train;
    for (const auto& t : run_user(sim, user, policy, steps)) {
      const auto line = transition_line(t);
      all << line << '\n';
      dst << line << '\n';
    }
  }
  if (!all || !train || !test) throw DataError("log: write failed");
}

void write_log(const LoggedDataset& dataset, std::ostream& out) {
  out << header_json(dataset.config, dataset.behavior_policy, dataset.num_users, dataset.steps)
             .dump()
      << '\n';
  for (const auto& t : dataset.transitions) out << transition_line(t) << '\n';
  if (!out) throw DataError("log: write failed");
}

void write_log(const LoggedDataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("log: cannot open " + path + " for writing");
  write_log(dataset, os);
}

LoggedDataset read_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("log: empty file");
  LoggedDataset data;
  try {
    const json h = json::parse(line);
    if (h.at("type") != "header" || h.at("schema") != kLogSchemaName) {
      throw DataError("log: missing header record");
    }
    if (h.at("schema_version").get<int>() != kLogSchemaVersion) {
      throw DataError("log: unsupported schema version " + h.at("schema_version").dump());
    }
    h.at("sim_config").get_to(data.config);
    h.at("behavior_policy").get_to(data.behavior_policy);
    h.at("num_users").get_to(data.num_users);
    h.at("steps").get_to(data.steps);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        data.transitions.push_back(parse_transition(line));
      } catch (const json::exception& e) {
        throw DataError("log: line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("log: ") + e.what());
  }
  return data;
}

LoggedDataset read_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("log: cannot open " + path);
  return read_log(is);
}

std::pair<LoggedDataset, LoggedDataset> split_by_trajectory(const LoggedDataset& data,
                                                            int holdout_every) {
  if (holdout_every < 2) throw ConfigError("split: holdout_every must be >= 2");
  LoggedDataset train, test;
  for (auto* d : {&train, &test}) {
    d->config = data.config;
    d->behavior_policy = data.behavior_policy;
    d->steps = data.steps;
  }
  std::size_t k = 0;
  for (const auto& [b, e] : data.trajectories()) {
    auto& dst = (k++ % static_cast<std::size_t>(holdout_every) == static_cast<std::size_t>(holdout_every - 1)) ? test : train;
    ++dst.num_users;
    dst.transitions.insert(dst.transitions.end(), data.transitions.begin() + b,
                           data.transitions.begin() + e);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace slmgac::feedsim
