#include "slmgac/diffcore/adam.hpp"

#include <cmath>

#include "slmgac/errors.hpp"

namespace slmgac::diffcore {

void adam_step(const ParamRefs& params, AdamState& state) {
  for (const auto& [path, p] : params) {
    if (!p->grad.all_finite()) throw NumericFault("adam_step: non-finite gradient in " + path);
    if (p->grad.shape() != p->value.shape()) {
      throw DimensionError("adam_step: gradient " + p->grad.shape_string() + " vs parameter " +
                           p->value.shape_string() + " for " + path);
    }
  }
  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& [path, p] : params) {
    auto [it, inserted] = state.moments.try_emplace(path);
    if (inserted) {
      it->second.first = Tensor(p->value.shape());
      it->second.second = Tensor(p->value.shape());
    }
    const auto n = static_cast<Eigen::Index>(p->value.size());
    Eigen::Map<Eigen::ArrayXd> m(it->second.first.values().data(), n);
    Eigen::Map<Eigen::ArrayXd> v(it->second.second.values().data(), n);
    Eigen::Map<Eigen::ArrayXd> w(p->value.values().data(), n);
    Eigen::Map<Eigen::ArrayXd> g(p->grad.values().data(), n);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
    w -= cfg.learning_rate * (m / correction1) / ((v / correction2).sqrt() + cfg.epsilon);
    g.setZero();
  }
}

}  // namespace slmgac::diffcore
