#pragma once

#include <cstddef>
#include <vector>

namespace slmgac::ope {

/// Finite MDP: P[s][a][s'] transition probabilities and R[s][a] rewards.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  std::vector<std::vector<std::vector<double>>> P;
  std::vector<std::vector<double>> R;
  double gamma = 0.9;

  /// Throws ConfigError on bad shapes, rows not summing to 1, or gamma outside [0, 1).
  void validate() const;
};

using QTable = std::vector<std::vector<double>>;

struct ValueIterationResult {
  QTable q;
  int iterations = 0;
};

/// Bellman-optimality iteration until successive Q tables differ by at most
/// `tolerance` in sup norm.
ValueIterationResult value_iteration(const TabularMDP& mdp, double tolerance = 1e-12,
                                     int max_iterations = 1'000'000);

/// max over (s, a) of |Q(s, a) - (R + gamma P max Q)(s, a)|.
double bellman_residual(const TabularMDP& mdp, const QTable& q);

/// argmax_a Q(s, a) per state, lowest action on ties.
std::vector<int> greedy_policy(const QTable& q);

struct PolicyEvaluation {
  std::vector<int> policy;
  std::vector<double> state_values;  // discounted `horizon`-step return from each state
  double value = 0.0;                // mean over start states
};

/// Evaluates every deterministic stationary policy over `horizon` steps and
/// returns the best by mean start-state value (first in enumeration order on
/// ties). Throws SizeError when num_actions^num_states exceeds max_policies.
PolicyEvaluation exhaustive_policy_eval(const TabularMDP& mdp, int horizon,
                                        std::size_t max_policies = 1u << 16);

}  // namespace slmgac::ope
