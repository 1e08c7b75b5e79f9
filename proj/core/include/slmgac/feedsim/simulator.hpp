#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slmgac/encoder/state_features.hpp"
#include "slmgac/feedsim/config.hpp"
#include "slmgac/random.hpp"

namespace slmgac::feedsim {

inline constexpr double kMaxWatchSeconds = 1200.0;

/// Categorical feature namespaces. Raw ids are `field * 1'000'000 + value`.
enum class Field : std::uint64_t {
  user = 1,
  recent_injections = 2,
  hour = 3,
  live = 4,
  author = 5,
  viewer_bucket = 6,
  author_gender = 7,
  video = 8,
};

constexpr std::uint64_t feature_id(Field f, std::uint64_t value) {
  return static_cast<std::uint64_t>(f) * 1'000'000ull + value;
}

struct UserProfile {
  int user_id = 0;
  int group_id = 0;
  int tier = 0;
  std::vector<std::uint64_t> static_feature_ids;
  double live_affinity = 0.0;
  double trailing_live_watch = 0.0;  // cumulative seconds over the past 3 weeks
  double fatigue = 0.0;
  std::deque<std::uint64_t> live_history;   // raw live ids, newest last
  std::deque<std::uint64_t> video_history;  // raw video ids, newest last
  std::deque<int> recent_actions;           // last few actions, newest last
};

struct LiveCandidate {
  int live_id = 0;
  int author_id = 0;
  double author_quality = 0.0;
  int viewer_count = 0;
  int author_gender = 0;
};

struct Request {
  int timestamp = 0;
  int num_videos = 6;
  double time_of_day_phase = 0.0;
  LiveCandidate live;
  std::vector<int> video_ids;
};

/// A user in the middle of a session together with the pending request.
struct Session {
  UserProfile user;
  Request request;
  int step = 0;
  bool terminated = false;
};

struct StepOutcome {
  double y_l = 0.0;
  double y_v = 0.0;
  bool terminal = false;
};

/// Probability of injecting (action 1) for the session's pending request.
using InjectProbability = std::function<double(const Session&)>;

struct BehaviorPolicy {
  std::string name;
  InjectProbability inject_probability;
};

BehaviorPolicy group_heuristic_policy(const SimConfig& config);
BehaviorPolicy uniform_policy();
BehaviorPolicy always_inject_policy();
BehaviorPolicy never_inject_policy();

/// Quantile split of users by trailing live watch time into K groups; higher
/// watch time gets the higher index. Ties break by user id.
void assign_groups(std::vector<UserProfile>& population, int K);

/// Group lookup fitted on a reference population with the assign_groups
/// rule. Known users keep their fitted group; others are placed by the
/// lowest trailing watch time of each fitted group.
class GroupAssigner {
 public:
  GroupAssigner() = default;
  /// (user_id, trailing_live_watch) pairs, one per user.
  GroupAssigner(const std::vector<std::pair<int, double>>& users, int K);

  int group_of(int user_id, double trailing_live_watch) const;
  int K() const { return K_; }

 private:
  int K_ = 1;
  std::vector<double> lower_;  // lower_[g]: smallest watch time seen in group g
  std::vector<std::pair<int, int>> known_;  // sorted (user_id, group)
};

/// Request-level reward y_l - (lambda / B) y_v.
double reward(double y_l, double y_v, int B, double lambda);
/// Lagrangian-penalized reward (1 + lambda) y_l - (lambda / B) y_v.
double penalized_reward(double y_l, double y_v, int B, double lambda);
/// Platform constraint value (1 / B) y_v - y_l.
double constraint_value(double y_l, double y_v, int B);

/// Static catalogue (authors, live streams, videos) plus the dynamics.
class FeedSimulator {
 public:
  explicit FeedSimulator(SimConfig config);

  const SimConfig& config() const { return config_; }

  /// Users 0..n-1 with latent affinity, trailing watch time and groups.
  std::vector<UserProfile> make_population(int num_users) const;

  /// Fresh session for `user` with initial histories and a first request.
  Session start_session(const UserProfile& user, Rng& rng) const;

  /// Executes `action` on the pending request, samples watch times, updates
  /// fatigue and histories, and either terminates or draws the next request.
  StepOutcome step(Session& session, int action, Rng& rng) const;

  /// Feature view of the pending request.
  encoder::StateFeatures state_of(const Session& session) const;

  /// Mean of the log-normal live watch time for an injection, before
  /// truncation; exposed for tests.
  double live_log_mean(const Session& session) const;

 private:
  struct Author {
    double quality = 0.0;
    int gender = 0;
  };
  struct Live {
    int author_id = 0;
    double base_viewers = 0.0;
  };

  Request make_request(const Session& session, int timestamp, Rng& rng) const;

  SimConfig config_;
  std::vector<Author> authors_;
  std::vector<Live> lives_;
};

}  // namespace slmgac::feedsim
