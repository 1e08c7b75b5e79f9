#include "slmgac/actor/actor.hpp"

#include <algorithm>
#include <cmath>

#include "slmgac/diffcore/ops.hpp"
#include "slmgac/errors.hpp"

namespace slmgac::actor {

Actor::Actor(std::size_t K, std::size_t in_dim, const std::vector<std::size_t>& widths,
             bool layer_norm, Rng& rng)
    : net(K, in_dim, widths, diffcore::Activation::identity, layer_norm, rng) {
  if (widths.empty() || widths.back() != 2) {
    throw ConfigError("actor: tower must end in width 2 (one logit per action)");
  }
}

Matrix Actor::logits(const Matrix& h, const std::vector<int>& groups, Cache* cache) const {
  return net.forward(h, groups, cache ? &cache->net : nullptr);
}

Matrix Actor::probabilities(const Matrix& h, const std::vector<int>& groups) const {
  return diffcore::softmax(logits(h, groups));
}

PolicyOutput Actor::policy_forward(const Matrix& h_row, int group) const {
  const Matrix z = net.route_forward(h_row, group);
  const Matrix p = diffcore::softmax(z);
  PolicyOutput out;
  out.logits = {z(0, 0), z(0, 1)};
  out.p = {p(0, 0), p(0, 1)};
  out.chosen_action = argmax(out.p);
  out.propensity = 1.0;
  return out;
}

Matrix Actor::backward(const Matrix& grad_logits, const Cache& cache) {
  return net.backward(grad_logits, cache.net);
}

void Actor::collect(const std::string& prefix, diffcore::ParamRefs& out) {
  net.collect(prefix, out);
}

int argmax(const std::array<double, 2>& p) { return p[1] > p[0] ? 1 : 0; }

std::vector<double> actor_weights(const Matrix& q_hat, const std::vector<int>& actions,
                                  bool normalize) {
  if (q_hat.cols() != 2 || static_cast<std::size_t>(q_hat.rows()) != actions.size()) {
    throw DimensionError("actor_weights: need one Q pair per logged action");
  }
  std::vector<double> w(actions.size());
  const Matrix soft = normalize ? diffcore::softmax(q_hat) : Matrix();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    w[i] = normalize ? soft(r, actions[i]) : q_hat(r, actions[i]);
  }
  return w;
}

ActorLoss actor_loss(const Matrix& probabilities, const std::vector<int>& actions,
                     const std::vector<double>& weights, Matrix* grad_logits) {
  const auto n = actions.size();
  if (static_cast<std::size_t>(probabilities.rows()) != n || weights.size() != n) {
    throw DimensionError("actor_loss: batch sizes differ");
  }
  ActorLoss out;
  if (grad_logits) *grad_logits = Matrix::Zero(probabilities.rows(), 2);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const int a = actions[i];
    const double p = probabilities(r, a);
    if (p < kLogClamp) {
      ++out.clamped;
      out.value -= weights[i] * std::log(kLogClamp) * inv_n;
      continue;
    }
    out.value -= weights[i] * std::log(p) * inv_n;
    if (grad_logits) {
      // d(-log softmax_a)/dz = p - onehot(a)
      for (int k = 0; k < 2; ++k) {
        (*grad_logits)(r, k) = weights[i] * inv_n * (probabilities(r, k) - (k == a ? 1.0 : 0.0));
      }
    }
  }
  return out;
}

double epsilon_greedy_probability(const std::array<double, 2>& p, double epsilon, int action) {
  return epsilon / 2.0 + (1.0 - epsilon) * (action == argmax(p) ? 1.0 : 0.0);
}

PolicyOutput select_action(PolicyOutput p, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("select_action: epsilon outside [0, 1]");
  const double psi = uniform01(rng);
  const double coin = uniform01(rng);
  p.chosen_action = psi < epsilon ? (coin < 0.5 ? 0 : 1) : argmax(p.p);
  p.propensity = epsilon_greedy_probability(p.p, epsilon, p.chosen_action);
  return p;
}

}  // namespace slmgac::actor
