#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

namespace slmgac::feedsim {

/// Every knob of the synthetic feed. Together with `seed` it fully determines
/// the generated trajectories.
struct SimConfig {
  int K = 6;              // user groups
  int B = 6;              // videos per request, 1 <= B < 10
  double lambda = 1.0;    // penalty weight on video watch time

  // Latent live affinity is drawn per activity tier; groups are later derived
  // from trailing live watch time, so they correlate with the tier.
  std::vector<double> tier_affinity_mean{-1.6, -1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<double> tier_affinity_spread{0.3, 0.3, 0.3, 0.3, 0.3, 0.3};

  double fatigue_gain = 1.0;     // added on injection
  double fatigue_decay = 0.6;    // multiplier on steps without injection
  double termination_base = 0.02;
  double termination_fatigue = 0.06;

  double tod_amplitude = 0.35;   // log-scale swing of live watch over a day
  int tod_period_steps = 288;    // requests per simulated day

  double live_log_base = 3.0;
  double live_log_sigma = 0.9;
  double live_quality_coef = 0.8;
  double live_fatigue_coef = 0.6;
  double live_watch_bias = 0.5;      // logit of watching an injected stream at zero affinity
  double live_watch_affinity = 1.5;  // logit slope in affinity

  double video_log_base = 2.6;       // per-video log seconds
  double video_log_sigma = 0.35;
  double video_injection_factor = 0.85;
  double video_fatigue_coef = 0.05;

  int num_lives = 400;
  int num_authors = 120;
  int num_videos = 5000;
  int history_init_max = 20;

  // Behavior policy: inject probability ramps linearly over group index.
  double behavior_min = 0.15;
  double behavior_max = 0.75;

  std::uint64_t seed = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

}  // namespace slmgac::feedsim
