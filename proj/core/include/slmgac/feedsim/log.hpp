#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slmgac/encoder/state_features.hpp"
#include "slmgac/feedsim/config.hpp"
#include "slmgac/feedsim/simulator.hpp"

namespace slmgac::feedsim {

inline constexpr int kLogSchemaVersion = 1;
inline constexpr const char* kLogSchemaName = "slmgac.logged_dataset";

struct NextStep {
  encoder::StateFeatures state;
  int action = 0;
  double y_l = 0.0;
  double y_v = 0.0;
  double reward = 0.0;
  double behavior_propensity = 1.0;
  int num_videos = 6;

  bool operator==(const NextStep&) const = default;
};

/// One logged interaction. `next` is empty for the terminal step of a session.
struct Transition {
  std::uint64_t trajectory_id = 0;
  int step = 0;
  int user_id = 0;
  int group_id = 0;
  int num_videos = 6;
  double trailing_live_watch = 0.0;
  encoder::StateFeatures state;
  int action = 0;
  double y_l = 0.0;
  double y_v = 0.0;
  double reward = 0.0;
  double constraint = 0.0;
  double behavior_propensity = 1.0;
  std::optional<NextStep> next;

  bool terminal() const { return !next.has_value(); }
  bool operator==(const Transition&) const = default;
};

struct LoggedDataset {
  SimConfig config;
  std::string behavior_policy;
  int num_users = 0;
  int steps = 0;
  std::vector<Transition> transitions;  // grouped by trajectory, in step order

  /// [begin, end) index ranges of each trajectory.
  std::vector<std::pair<std::size_t, std::size_t>> trajectories() const;
  std::size_t num_trajectories() const { return trajectories().size(); }
};

/// Runs `num_users` sessions of at most `steps` requests each under the
/// behavior policy. Each user gets its own RNG stream derived from
/// (config.seed, user_id). Throws DataError if the policy assigns zero
/// probability to an action it then takes.
LoggedDataset simulate(const SimConfig& config, const BehaviorPolicy& policy, int num_users,
                       int steps);

/// Streaming variant: writes the header and then each trajectory as soon as
/// it is generated, so memory stays bounded by one session.
void generate_log(const SimConfig& config, const BehaviorPolicy& policy, int num_users, int steps,
                  std::ostream& out);
void generate_log(const SimConfig& config, const BehaviorPolicy& policy, int num_users, int steps,
                  const std::string& path);

/// One pass that writes the full log together with its trajectory split (the
/// same routing as split_by_trajectory).
void generate_log(const SimConfig& config, const BehaviorPolicy& policy, int num_users, int steps,
                  int holdout_every, std::ostream& all, std::ostream& train, std::ostream& test);

void write_log(const LoggedDataset& dataset, std::ostream& out);
void write_log(const LoggedDataset& dataset, const std::string& path);
LoggedDataset read_log(std::istream& in);
LoggedDataset read_log(const std::string& path);

std::string transition_line(const Transition& t);
Transition parse_transition(const std::string& line);

/// Splits whole trajectories: every `holdout_every`-th trajectory goes to the
/// second set (5 gives the 4:1 train/test ratio).
std::pair<LoggedDataset, LoggedDataset> split_by_trajectory(const LoggedDataset& data,
                                                            int holdout_every = 5);

}  // namespace slmgac::feedsim
