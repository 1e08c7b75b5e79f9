#include "slmgac/critic/critic.hpp"

#include <algorithm>
#include <cmath>

#include "slmgac/diffcore/ops.hpp"
#include "slmgac/errors.hpp"

namespace slmgac::critic {

using diffcore::Activation;

Critic::Critic(std::size_t K, std::size_t in_dim, const std::vector<std::size_t>& rpn_widths,
               const std::vector<std::size_t>& qrn_widths, bool layer_norm, Rng& rng)
    : f_gamma(K, in_dim, rpn_widths, Activation::sigmoid, layer_norm, rng),
      g_theta(K, in_dim, rpn_widths, Activation::sigmoid, layer_norm, rng),
      qrn(K, in_dim, qrn_widths, Activation::identity, layer_norm, rng) {
  if (qrn_widths.empty() || qrn_widths.back() != 2) {
    throw ConfigError("critic: residual tower must end in width 2 (one output per action)");
  }
}

Critic::Towers Critic::forward(const Matrix& h, const std::vector<int>& groups,
                               Cache* cache) const {
  return {f_gamma.forward(h, groups, cache ? &cache->f : nullptr),
          g_theta.forward(h, groups, cache ? &cache->g : nullptr),
          qrn.forward(h, groups, cache ? &cache->t : nullptr)};
}

Matrix Critic::backward(const Towers& grads, const Cache& cache) {
  Matrix dh = f_gamma.backward(grads.f_gamma, cache.f);
  dh += g_theta.backward(grads.g_theta, cache.g);
  dh += qrn.backward(grads.t, cache.t);
  return dh;
}

void Critic::collect(const std::string& prefix, diffcore::ParamRefs& out) {
  f_gamma.collect(prefix + "/rpn_live", out);
  g_theta.collect(prefix + "/rpn_video", out);
  qrn.collect(prefix + "/qrn", out);
}

namespace {

Eigen::RowVectorXd row_of(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_shapes(const Critic::Towers& towers, const BinWeights& o, const RewardScale& scale,
                  const TimeBinSpec& spec) {
  const auto n = towers.f_gamma.rows();
  const auto w = static_cast<Eigen::Index>(spec.width());
  if (towers.f_gamma.cols() != w || towers.g_theta.cols() != w) {
    throw DimensionError("reward prediction: ratio towers have width " +
                         std::to_string(towers.f_gamma.cols()) + ", bins need " +
                         std::to_string(w));
  }
  if (o.live.rows() != n || o.video.rows() != n || o.live.cols() != w || o.video.cols() != w) {
    throw ContractError("reward prediction: bin weights missing or mis-shaped");
  }
  if (scale.video_scale.size() != n) throw DimensionError("reward prediction: scale length");
}

}  // namespace

RewardPrediction predict_reward(const Critic::Towers& towers, const BinWeights& o,
                                const RewardScale& scale, const TimeBinSpec& spec) {
  check_shapes(towers, o, scale, spec);
  const Eigen::RowVectorXd st_l = row_of(spec.starts(Medium::live));
  const Eigen::RowVectorXd wd_l = row_of(spec.ends(Medium::live)) - st_l;
  const Eigen::RowVectorXd st_v = row_of(spec.starts(Medium::video));
  const Eigen::RowVectorXd wd_v = row_of(spec.ends(Medium::video)) - st_v;
  const auto n = towers.f_gamma.rows();
  RewardPrediction p;
  p.F.resize(n);
  p.G.resize(n);
  p.R.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.F[i] = o.live.row(i).dot(st_l + towers.f_gamma.row(i).cwiseProduct(wd_l));
    p.G[i] = o.video.row(i).dot(st_v + towers.g_theta.row(i).cwiseProduct(wd_v));
    p.R[i] = diffcore::sigmoid((p.F[i] - scale.video_scale[i] * p.G[i]) / scale.tau_r);
  }
  return p;
}

void reward_backward(const VectorXd& grad_r, const RewardPrediction& pred, const BinWeights& o,
                     const RewardScale& scale, const TimeBinSpec& spec,
                     Critic::Towers& grad_towers) {
  const Eigen::RowVectorXd wd_l = row_of(spec.ends(Medium::live)) - row_of(spec.starts(Medium::live));
  const Eigen::RowVectorXd wd_v = row_of(spec.ends(Medium::video)) - row_of(spec.starts(Medium::video));
  for (Eigen::Index i = 0; i < grad_r.size(); ++i) {
    const double dz = grad_r[i] * pred.R[i] * (1.0 - pred.R[i]) / scale.tau_r;
    grad_towers.f_gamma.row(i) += dz * o.live.row(i).cwiseProduct(wd_l);
    grad_towers.g_theta.row(i) -= dz * scale.video_scale[i] * o.video.row(i).cwiseProduct(wd_v);
  }
}

VectorXd q_values(const RewardPrediction& pred, const Matrix& t, const std::vector<int>& actions,
                  double gamma) {
  VectorXd q(pred.R.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const int a = actions[static_cast<std::size_t>(i)];
    if (a != 0 && a != 1) throw ContractError("q_values: action must be 0 or 1");
    q[i] = pred.R[i] + gamma * t(i, a);
  }
  return q;
}

double normalized_reward(const BinAssignment& live, const BinAssignment& video,
                         double video_scale, double tau_r, const TimeBinSpec& spec) {
  const double y_l = reconstruct(live, Medium::live, spec);
  const double y_v = reconstruct(video, Medium::video, spec);
  return diffcore::sigmoid((y_l - video_scale * y_v) / tau_r);
}

double q_label(double r_norm, bool terminal, double gamma,
               const std::array<double, 2>& min_target_q) {
  if (terminal) return r_norm;
  return r_norm + gamma * std::max(min_target_q[0], min_target_q[1]);
}

double q_label_vanilla(double r_norm, bool terminal, double gamma, const std::array<double, 2>& p,
                       const std::array<double, 2>& min_target_q) {
  if (terminal) return r_norm;
  return r_norm + gamma * (p[0] * min_target_q[0] + p[1] * min_target_q[1]);
}

double critic_loss(const std::array<VectorXd, 2>& q, const VectorXd& labels, double delta,
                   std::array<VectorXd, 2>* grads) {
  const auto n = labels.size();
  if (n == 0) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    if (q[i].size() != n) throw DimensionError("critic_loss: Q and label lengths differ");
    if (grads) (*grads)[i] = VectorXd::Zero(n);
    double sum = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      sum += diffcore::huber(q[i][b], labels[b], delta);
      if (grads) (*grads)[i][b] = diffcore::huber_grad(q[i][b], labels[b], delta) / n;
    }
    loss += sum / static_cast<double>(n);
  }
  return loss;
}

double sl_loss(const std::array<const Critic::Towers*, 2>& towers,
               const std::vector<RatioTarget>& targets, double delta,
               std::array<Critic::Towers*, 2> grads) {
  const auto n = static_cast<double>(targets.size());
  if (targets.empty()) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& t = *towers[i];
    if (static_cast<std::size_t>(t.f_gamma.rows()) != targets.size()) {
      throw DimensionError("sl_loss: tower rows and targets differ");
    }
    double sum = 0.0;
    for (std::size_t b = 0; b < targets.size(); ++b) {
      const auto r = static_cast<Eigen::Index>(b);
      const auto kl = static_cast<Eigen::Index>(targets[b].live.index);
      const auto kv = static_cast<Eigen::Index>(targets[b].video.index);
      sum += diffcore::huber(t.f_gamma(r, kl), targets[b].live.delta, delta);
      sum += diffcore::huber(t.g_theta(r, kv), targets[b].video.delta, delta);
      if (grads[i]) {
        grads[i]->f_gamma(r, kl) += diffcore::huber_grad(t.f_gamma(r, kl), targets[b].live.delta, delta) / n;
        grads[i]->g_theta(r, kv) += diffcore::huber_grad(t.g_theta(r, kv), targets[b].video.delta, delta) / n;
      }
    }
    loss += sum / n;
  }
  return loss;
}

CriticPair::CriticPair(std::size_t K, std::size_t in_dim,
                       const std::vector<std::size_t>& rpn_widths,
                       const std::vector<std::size_t>& qrn_widths, bool layer_norm, Rng& rng)
    : current{Critic(K, in_dim, rpn_widths, qrn_widths, layer_norm, rng),
              Critic(K, in_dim, rpn_widths, qrn_widths, layer_norm, rng)},
      target(current) {}

void CriticPair::collect(const std::string& prefix, diffcore::ParamRefs& out) {
  current[0].collect(prefix + "/critic1", out);
  current[1].collect(prefix + "/critic2", out);
}

void CriticPair::collect_targets(const std::string& prefix, diffcore::ParamRefs& out) {
  target[0].collect(prefix + "/critic1", out);
  target[1].collect(prefix + "/critic2", out);
}

void CriticPair::sync_targets(SyncMode mode, double tau) {
  diffcore::ParamRefs src, dst;
  collect("", src);
  collect_targets("", dst);
  blend_params(src, dst, mode == SyncMode::hard ? 1.0 : tau);
}

void blend_params(const diffcore::ParamRefs& source, const diffcore::ParamRefs& target,
                  double tau) {
  if (source.size() != target.size()) throw DimensionError("blend: parameter lists differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("blend: tau must lie in [0, 1]");
  if (tau == 0.0) return;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto& s = source[i].second->value;
    auto& t = target[i].second->value;
    if (s.shape() != t.shape()) {
      throw DimensionError("blend: shape mismatch at " + source[i].first);
    }
    if (tau == 1.0) {
      t = s;
    } else {
      t.matrix() = tau * s.matrix() + (1.0 - tau) * t.matrix();
    }
  }
}

}  // namespace slmgac::critic
