#pragma once

#include <array>
#include <string>
#include <vector>

#include "slmgac/critic/time_bins.hpp"
#include "slmgac/diffcore/tensor.hpp"
#include "slmgac/mgsd/multi_group_net.hpp"

namespace slmgac::critic {

using diffcore::Matrix;
using Eigen::VectorXd;

/// One critic: two ratio towers (f_Gamma over live bins, g_Theta over video
/// bins, both sigmoid) forming the reward prediction R, plus a residual tower
/// T with one output per action. Q(s, a) = R(s, a) + gamma * T(s)[a].
class Critic {
 public:
  struct Cache {
    mgsd::MultiGroupNet::Cache f;
    mgsd::MultiGroupNet::Cache g;
    mgsd::MultiGroupNet::Cache t;
  };
  struct Towers {
    Matrix f_gamma;  // n x W, in (0, 1)
    Matrix g_theta;  // n x W, in (0, 1)
    Matrix t;        // n x 2
  };

  Critic() = default;
  Critic(std::size_t K, std::size_t in_dim, const std::vector<std::size_t>& rpn_widths,
         const std::vector<std::size_t>& qrn_widths, bool layer_norm, Rng& rng);

  Towers forward(const Matrix& h, const std::vector<int>& groups, Cache* cache = nullptr) const;
  /// Returns d loss / d h.
  Matrix backward(const Towers& grads, const Cache& cache);

  void collect(const std::string& prefix, diffcore::ParamRefs& out);

  mgsd::MultiGroupNet f_gamma;
  mgsd::MultiGroupNet g_theta;
  mgsd::MultiGroupNet qrn;
};

/// Per-row bin weights for one evaluated action: one-hots for observed watch
/// times, BinPrior rows for counterfactual ones.
struct BinWeights {
  Matrix live;   // n x W
  Matrix video;  // n x W
};

/// Reward-scale constants entering R.
struct RewardScale {
  double tau_r = 100.0;
  VectorXd video_scale;  // lambda / B per row
};

struct RewardPrediction {
  VectorXd F;  // reconstructed live seconds
  VectorXd G;  // reconstructed video seconds (unscaled)
  VectorXd R;  // sigmoid((F - scale * G) / tau_r)
};

RewardPrediction predict_reward(const Critic::Towers& towers, const BinWeights& o,
                                const RewardScale& scale, const TimeBinSpec& spec);

/// Adds to grad_towers the effect of dR on the ratio towers.
void reward_backward(const VectorXd& grad_r, const RewardPrediction& pred, const BinWeights& o,
                     const RewardScale& scale, const TimeBinSpec& spec,
                     Critic::Towers& grad_towers);

/// Q = R + gamma * T[action] per row.
VectorXd q_values(const RewardPrediction& pred, const Matrix& t, const std::vector<int>& actions,
                  double gamma);

/// sigmoid((y_l - (lambda / B) y_v) / tau_r) from the true-bin reconstructions.
double normalized_reward(const BinAssignment& live, const BinAssignment& video,
                         double video_scale, double tau_r, const TimeBinSpec& spec);

/// r_norm + gamma * max_a min_i Q'_i(s', a); r_norm alone when terminal.
double q_label(double r_norm, bool terminal, double gamma, const std::array<double, 2>& min_target_q);
/// r_norm + gamma * sum_a p(s', a) min_i Q'_i(s', a); r_norm alone when terminal.
double q_label_vanilla(double r_norm, bool terminal, double gamma, const std::array<double, 2>& p,
                       const std::array<double, 2>& min_target_q);

/// Sum over both critics of the mean Huber error against the labels. Writes
/// d loss / d Q_i when grads is given.
double critic_loss(const std::array<VectorXd, 2>& q, const VectorXd& labels, double delta,
                   std::array<VectorXd, 2>* grads = nullptr);

/// Per-sample supervision for the ratio towers.
struct RatioTarget {
  BinAssignment live;
  BinAssignment video;
};

/// Sum over both critics of the mean Huber error between the ratio output at
/// the true bin and the true within-bin ratio, for both media. Only the true
/// bin's entry receives gradient; grads are accumulated into f_gamma/g_theta.
double sl_loss(const std::array<const Critic::Towers*, 2>& towers,
               const std::vector<RatioTarget>& targets, double delta,
               std::array<Critic::Towers*, 2> grads = {nullptr, nullptr});

enum class SyncMode { hard, polyak };

/// Two current critics and their target copies.
struct CriticPair {
  std::array<Critic, 2> current;
  std::array<Critic, 2> target;

  CriticPair() = default;
  CriticPair(std::size_t K, std::size_t in_dim, const std::vector<std::size_t>& rpn_widths,
             const std::vector<std::size_t>& qrn_widths, bool layer_norm, Rng& rng);

  void collect(const std::string& prefix, diffcore::ParamRefs& out);
  void collect_targets(const std::string& prefix, diffcore::ParamRefs& out);

  /// hard: target <- current. polyak: target <- tau current + (1 - tau) target.
  void sync_targets(SyncMode mode, double tau = 1.0);
};

/// target <- tau * source + (1 - tau) * target, matched by position.
void blend_params(const diffcore::ParamRefs& source, const diffcore::ParamRefs& target, double tau);

}  // namespace slmgac::critic
