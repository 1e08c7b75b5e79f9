#pragma once

#include <array>
#include <string>
#include <vector>

#include "slmgac/diffcore/tensor.hpp"
#include "slmgac/mgsd/multi_group_net.hpp"
#include "slmgac/random.hpp"

namespace slmgac::actor {

using diffcore::Matrix;

inline constexpr double kLogClamp = 1e-12;

struct PolicyOutput {
  std::array<double, 2> logits{0.0, 0.0};
  std::array<double, 2> p{0.5, 0.5};
  int chosen_action = 0;
  double propensity = 1.0;
};

/// Group-routed policy head producing two action logits.
class Actor {
 public:
  struct Cache {
    mgsd::MultiGroupNet::Cache net;
  };

  Actor() = default;
  Actor(std::size_t K, std::size_t in_dim, const std::vector<std::size_t>& widths,
        bool layer_norm, Rng& rng);

  /// n x 2 logits.
  Matrix logits(const Matrix& h, const std::vector<int>& groups, Cache* cache = nullptr) const;
  /// n x 2 action probabilities.
  Matrix probabilities(const Matrix& h, const std::vector<int>& groups) const;
  /// Single-state policy output; chosen_action is the argmax with propensity 1.
  PolicyOutput policy_forward(const Matrix& h_row, int group) const;

  Matrix backward(const Matrix& grad_logits, const Cache& cache);
  void collect(const std::string& prefix, diffcore::ParamRefs& out);

  mgsd::MultiGroupNet net;
};

int argmax(const std::array<double, 2>& p);

/// Per-sample weight on log p(s, a_t): softmax over the two actions of
/// min-critic Q evaluated at the logged action when normalize is set, raw
/// Q(s, a_t) otherwise. Weights are constants for backprop.
std::vector<double> actor_weights(const Matrix& q_hat, const std::vector<int>& actions,
                                  bool normalize);

struct ActorLoss {
  double value = 0.0;
  std::size_t clamped = 0;  // samples whose p(s, a_t) hit the log clamp
};

/// mean over the batch of -w * log p(s, a_t). `grad_logits` receives
/// d loss / d logits when given.
ActorLoss actor_loss(const Matrix& probabilities, const std::vector<int>& actions,
                     const std::vector<double>& weights, Matrix* grad_logits = nullptr);

/// Epsilon-greedy over argmax p: uniform action with probability epsilon.
/// Propensity is epsilon / 2 + (1 - epsilon) * [action == argmax].
PolicyOutput select_action(PolicyOutput p, double epsilon, Rng& rng);
double epsilon_greedy_probability(const std::array<double, 2>& p, double epsilon, int action);

}  // namespace slmgac::actor
