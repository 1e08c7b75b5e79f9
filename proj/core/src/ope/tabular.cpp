#include "slmgac/ope/tabular.hpp"

#include <algorithm>
#include <cmath>

#include "slmgac/errors.hpp"

namespace slmgac::ope {

void TabularMDP::validate() const {
  if (num_states < 1 || num_actions < 1) throw ConfigError("mdp: need at least one state and action");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("mdp: gamma must lie in [0, 1)");
  const auto S = static_cast<std::size_t>(num_states);
  const auto A = static_cast<std::size_t>(num_actions);
  if (P.size() != S || R.size() != S) throw ConfigError("mdp: P and R need one entry per state");
  for (std::size_t s = 0; s < S; ++s) {
    if (P[s].size() != A || R[s].size() != A) throw ConfigError("mdp: one entry per action required");
    for (std::size_t a = 0; a < A; ++a) {
      if (P[s][a].size() != S) throw ConfigError("mdp: transition rows need one entry per state");
      double sum = 0.0;
      for (double p : P[s][a]) {
        if (p < 0.0) throw ConfigError("mdp: negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("mdp: transition row does not sum to 1");
    }
  }
}

namespace {

QTable backup(const TabularMDP& mdp, const QTable& q) {
  const auto S = static_cast<std::size_t>(mdp.num_states);
  const auto A = static_cast<std::size_t>(mdp.num_actions);
  std::vector<double> v(S);
  for (std::size_t s = 0; s < S; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
  QTable out(S, std::vector<double>(A));
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double ev = 0.0;
      for (std::size_t t = 0; t < S; ++t) ev += mdp.P[s][a][t] * v[t];
      out[s][a] = mdp.R[s][a] + mdp.gamma * ev;
    }
  }
  return out;
}

double sup_diff(const QTable& a, const QTable& b) {
  double d = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    for (std::size_t k = 0; k < a[s].size(); ++k) d = std::max(d, std::abs(a[s][k] - b[s][k]));
  }
  return d;
}

}  // namespace

ValueIterationResult value_iteration(const TabularMDP& mdp, double tolerance, int max_iterations) {
  mdp.validate();
  ValueIterationResult r;
  r.q.assign(static_cast<std::size_t>(mdp.num_states),
             std::vector<double>(static_cast<std::size_t>(mdp.num_actions), 0.0));
  while (r.iterations < max_iterations) {
    QTable next = backup(mdp, r.q);
    ++r.iterations;
    const double d = sup_diff(next, r.q);
    r.q = std::move(next);
    if (d <= tolerance) break;
  }
  return r;
}

double bellman_residual(const TabularMDP& mdp, const QTable& q) {
  return sup_diff(backup(mdp, q), q);
}

std::vector<int> greedy_policy(const QTable& q) {
  std::vector<int> pi;
  for (const auto& row : q) {
    pi.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return pi;
}

PolicyEvaluation exhaustive_policy_eval(const TabularMDP& mdp, int horizon,
                                        std::size_t max_policies) {
  mdp.validate();
  if (horizon < 0) throw ConfigError("exhaustive_policy_eval: horizon must be >= 0");
  const auto S = static_cast<std::size_t>(mdp.num_states);
  const auto A = static_cast<std::size_t>(mdp.num_actions);
  std::size_t count = 1;
  for (std::size_t s = 0; s < S; ++s) {
    if (count > max_policies / A) {
      throw SizeError("exhaustive_policy_eval: " + std::to_string(A) + "^" + std::to_string(S) +
                      " policies exceed the bound " + std::to_string(max_policies));
    }
    count *= A;
  }

  PolicyEvaluation best;
  std::vector<int> pi(S, 0);
  for (std::size_t code = 0; code < count; ++code) {
    std::size_t c = code;
    for (std::size_t s = 0; s < S; ++s) {
      pi[s] = static_cast<int>(c % A);
      c /= A;
    }
    std::vector<double> v(S, 0.0);
    for (int h = 0; h < horizon; ++h) {
      std::vector<double> next(S);
      for (std::size_t s = 0; s < S; ++s) {
        const auto a = static_cast<std::size_t>(pi[s]);
        double ev = 0.0;
        for (std::size_t t = 0; t < S; ++t) ev += mdp.P[s][a][t] * v[t];
        next[s] = mdp.R[s][a] + mdp.gamma * ev;
      }
      v = std::move(next);
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(S);
    if (code == 0 || mean > best.value) best = {pi, v, mean};
  }
  return best;
}

}  // namespace slmgac::ope
