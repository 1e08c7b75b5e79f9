#include <algorithm>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "slmgac/errors.hpp"
#include "slmgac/feedsim/log.hpp"
#include "slmgac/feedsim/simulator.hpp"

using namespace slmgac;
using namespace slmgac::feedsim;

namespace {

std::vector<UserProfile> users_with_watch(const std::vector<double>& watch) {
  std::vector<UserProfile> users;
  for (std::size_t i = 0; i < watch.size(); ++i) {
    UserProfile u;
    u.user_id = static_cast<int>(i);
    u.trailing_live_watch = watch[i];
    users.push_back(u);
  }
  return users;
}

}  // namespace

TEST(Groups, SingleGroupTakesEveryone) {
  auto users = users_with_watch({5, 1, 9, 3});
  assign_groups(users, 1);
  for (const auto& u : users) EXPECT_EQ(u.group_id, 0);
}

TEST(Groups, SixUsersSixGroupsInOrder) {
  auto users = users_with_watch({0, 1, 2, 3, 4, 5});
  assign_groups(users, 6);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(users[i].group_id, i);
}

TEST(Groups, HundredUsersBalanced) {
  std::vector<double> watch;
  for (int i = 0; i < 100; ++i) watch.push_back((i * 37) % 100);
  auto users = users_with_watch(watch);
  assign_groups(users, 6);
  std::vector<int> sizes(6, 0);
  for (const auto& u : users) ++sizes[u.group_id];
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
}

TEST(Groups, HigherWatchNeverLowerGroup) {
  std::vector<double> watch;
  for (int i = 0; i < 50; ++i) watch.push_back((i * 13) % 17);
  auto users = users_with_watch(watch);
  assign_groups(users, 4);
  for (const auto& a : users) {
    for (const auto& b : users) {
      if (a.trailing_live_watch < b.trailing_live_watch) {
        EXPECT_LE(a.group_id, b.group_id);
      }
    }
  }
}

TEST(Groups, AssignerKeepsKnownUsersAndPlacesNewOnes) {
  std::vector<std::pair<int, double>> ref;
  for (int i = 0; i < 12; ++i) ref.emplace_back(i, static_cast<double>(i));
  const GroupAssigner assigner(ref, 3);
  EXPECT_EQ(assigner.group_of(0, 0.0), 0);
  EXPECT_EQ(assigner.group_of(11, 11.0), 2);
  EXPECT_EQ(assigner.group_of(1000, -1.0), 0);
  EXPECT_EQ(assigner.group_of(1001, 100.0), 2);
}

TEST(Groups, MoreGroupsThanUsersIsAConfigError) {
  auto users = users_with_watch({1, 2});
  EXPECT_THROW(assign_groups(users, 3), ConfigError);
}

TEST(Reward, Arithmetic) {
  EXPECT_DOUBLE_EQ(reward(30, 60, 6, 1.0), 20.0);
  EXPECT_DOUBLE_EQ(reward(17, 300, 6, 0.0), 17.0);
  EXPECT_DOUBLE_EQ(reward(0, 60, 6, 1.2), -12.0);
}

TEST(PenalizedReward, Arithmetic) {
  EXPECT_DOUBLE_EQ(penalized_reward(10, 50, 5, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(penalized_reward(17, 300, 6, 0.0), 17.0);
}

TEST(PenalizedReward, EqualsRewardPlusLambdaLive) {
  for (double yl : {0.0, 3.5, 200.0}) {
    for (double yv : {0.0, 42.0, 1200.0}) {
      for (double lambda : {0.0, 0.5, 2.0}) {
        for (int B : {1, 6, 9}) {
          EXPECT_NEAR(penalized_reward(yl, yv, B, lambda), reward(yl, yv, B, lambda) + lambda * yl, 1e-9);
        }
      }
    }
  }
}

TEST(Constraint, Arithmetic) {
  EXPECT_DOUBLE_EQ(constraint_value(10, 60, 6), 0.0);
  EXPECT_DOUBLE_EQ(constraint_value(30, 60, 6), -20.0);
  EXPECT_DOUBLE_EQ(constraint_value(0, 60, 6), 10.0);
}

TEST(Simulator, NoInjectionMeansNoLiveWatch) {
  SimConfig cfg;
  FeedSimulator sim(cfg);
  const auto users = sim.make_population(20);
  auto rng = make_rng(4);
  for (const auto& u : users) {
    auto s = sim.start_session(u, rng);
    for (int t = 0; t < 30 && !s.terminated; ++t) {
      const auto out = sim.step(s, 0, rng);
      EXPECT_EQ(out.y_l, 0.0);
    }
  }
}

TEST(Simulator, AffinityRaisesLiveWatchMonteCarlo) {
  SimConfig cfg;
  FeedSimulator sim(cfg);
  const auto users = sim.make_population(200);
  const auto top = *std::max_element(users.begin(), users.end(), [](const auto& a, const auto& b) {
    return a.live_affinity < b.live_affinity;
  });
  UserProfile cold = top;
  cold.live_affinity = 0.0;
  auto mean_live = [&](const UserProfile& u, std::uint64_t seed) {
    auto rng = make_rng(seed);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
      auto s = sim.start_session(u, rng);
      sum += sim.step(s, 1, rng).y_l;
    }
    return sum / 10000.0;
  };
  EXPECT_LT(mean_live(cold, 1), mean_live(top, 2));
}

TEST(Simulator, FatigueShortensSessionsMonteCarlo) {
  SimConfig cfg;
  FeedSimulator sim(cfg);
  const auto user = sim.make_population(10).front();
  auto mean_length = [&](double fatigue, std::uint64_t seed) {
    auto rng = make_rng(seed);
    double total = 0.0;
    for (int i = 0; i < 10000; ++i) {
      auto s = sim.start_session(user, rng);
      s.user.fatigue = fatigue;
      int len = 0;
      while (!s.terminated && len < 1000) {
        sim.step(s, 0, rng);
        ++len;
      }
      total += len;
    }
    return total / 10000.0;
  };
  EXPECT_GT(mean_length(0.0, 5), mean_length(6.0, 6));
}

TEST(Simulator, WatchTimesStayInRange) {
  SimConfig cfg;
  const auto data = simulate(cfg, uniform_policy(), 100, 30);
  for (const auto& t : data.transitions) {
    EXPECT_GE(t.y_l, 0.0);
    EXPECT_LE(t.y_l, kMaxWatchSeconds);
    EXPECT_GE(t.y_v, 0.0);
    EXPECT_LE(t.y_v, kMaxWatchSeconds);
    EXPECT_GT(t.behavior_propensity, 0.0);
    if (t.action == 0) {
      EXPECT_EQ(t.y_l, 0.0);
    }
    EXPECT_LE(t.state.live_history_ids.size(), 50u);
    EXPECT_LE(t.state.video_history_ids.size(), 50u);
  }
}

TEST(Log, UniformPolicyPropensitiesAreHalf) {
  const auto data = simulate(SimConfig{}, uniform_policy(), 50, 20);
  ASSERT_FALSE(data.transitions.empty());
  for (const auto& t : data.transitions) EXPECT_EQ(t.behavior_propensity, 0.5);
}

TEST(Log, AlwaysInjectFrequencyIsOne) {
  const auto data = simulate(SimConfig{}, always_inject_policy(), 50, 20);
  for (const auto& t : data.transitions) EXPECT_EQ(t.action, 1);
}

TEST(Log, SameSeedGivesIdenticalBytes) {
  SimConfig cfg;
  cfg.seed = 7;
  std::ostringstream a, b;
  generate_log(cfg, group_heuristic_policy(cfg), 60, 20, a);
  generate_log(cfg, group_heuristic_policy(cfg), 60, 20, b);
  EXPECT_EQ(a.str(), b.str());
  cfg.seed = 8;
  std::ostringstream c;
  generate_log(cfg, group_heuristic_policy(cfg), 60, 20, c);
  EXPECT_NE(a.str(), c.str());
}

TEST(Log, HeaderPlusOneLinePerTransition) {
  SimConfig cfg;
  const auto data = simulate(cfg, group_heuristic_policy(cfg), 40, 15);
  std::ostringstream os;
  generate_log(cfg, group_heuristic_policy(cfg), 40, 15, os);
  const std::string text = os.str();
  const auto lines = std::count(text.begin(), text.end(), '\n');
  EXPECT_EQ(static_cast<std::size_t>(lines), data.transitions.size() + 1);
  EXPECT_EQ(data.num_trajectories(), 40u);
}

TEST(Log, WriteReadRoundTrip) {
  SimConfig cfg;
  const auto data = simulate(cfg, group_heuristic_policy(cfg), 30, 10);
  std::stringstream ss;
  write_log(data, ss);
  const auto back = read_log(ss);
  EXPECT_EQ(back.transitions, data.transitions);
  EXPECT_EQ(back.num_users, data.num_users);
  EXPECT_EQ(back.behavior_policy, data.behavior_policy);
  for (const auto& t : data.transitions) EXPECT_EQ(parse_transition(transition_line(t)), t);
}

TEST(Log, NextStepMatchesFollowingTransition) {
  SimConfig cfg;
  const auto data = simulate(cfg, group_heuristic_policy(cfg), 30, 10);
  for (const auto& [b, e] : data.trajectories()) {
    for (std::size_t i = b; i + 1 < e; ++i) {
      ASSERT_TRUE(data.transitions[i].next.has_value());
      EXPECT_EQ(data.transitions[i].next->state, data.transitions[i + 1].state);
      EXPECT_EQ(data.transitions[i].next->action, data.transitions[i + 1].action);
      EXPECT_EQ(data.transitions[i].next->y_l, data.transitions[i + 1].y_l);
    }
  }
}

TEST(Log, MalformedInputIsADataError) {
  std::istringstream empty("");
  EXPECT_THROW(read_log(empty), DataError);
  std::istringstream junk("{\"type\":\"header\"}\nnot json\n");
  EXPECT_THROW(read_log(junk), DataError);
  EXPECT_THROW(parse_transition("{\"type\":\"transition\"}"), DataError);
}

TEST(Log, SplitHoldsOutEveryFifthTrajectory) {
  SimConfig cfg;
  const auto data = simulate(cfg, group_heuristic_policy(cfg), 50, 10);
  const auto [train, test] = split_by_trajectory(data, 5);
  EXPECT_EQ(train.num_trajectories(), 40u);
  EXPECT_EQ(test.num_trajectories(), 10u);
  EXPECT_EQ(train.transitions.size() + test.transitions.size(), data.transitions.size());
}

TEST(Log, StreamedSplitMatchesInMemorySplit) {
  SimConfig cfg;
  std::ostringstream all, train, test;
  generate_log(cfg, group_heuristic_policy(cfg), 23, 8, 5, all, train, test);
  std::istringstream all_in(all.str()), train_in(train.str()), test_in(test.str());
  const auto full = read_log(all_in);
  const auto [tr, te] = split_by_trajectory(full, 5);
  EXPECT_EQ(read_log(train_in).transitions, tr.transitions);
  EXPECT_EQ(read_log(test_in).transitions, te.transitions);
}

TEST(Config, JsonRoundTripAndValidation) {
  SimConfig cfg;
  cfg.K = 4;
  cfg.lambda = 0.3;
  nlohmann::json j = cfg;
  EXPECT_EQ(j.get<SimConfig>().K, 4);
  EXPECT_EQ(j.get<SimConfig>().lambda, 0.3);
  SimConfig bad;
  bad.B = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}
