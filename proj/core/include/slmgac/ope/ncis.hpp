#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slmgac/feedsim/log.hpp"

namespace slmgac::ope {

inline constexpr int kReportSchemaVersion = 1;

struct NcisConfig {
  double cap = 10.0;  // +infinity gives plain self-normalized IS
  double gamma = 0.9;
};

void to_json(nlohmann::json& j, const NcisConfig& c);
void from_json(const nlohmann::json& j, NcisConfig& c);

struct NcisReport {
  double estimate = 0.0;     // sum w gamma^t r / sum w
  double raw_sum = 0.0;      // sum w gamma^t r
  double weight_sum = 0.0;   // sum w
  double cumulative = 0.0;   // estimate * number of trajectories
  std::size_t num_trajectories = 0;
  std::size_t num_transitions = 0;
  double effective_sample_size = 0.0;  // (sum w)^2 / sum w^2
  double clip_fraction = 0.0;          // share of ratios above the cap
  NcisConfig config;
};

nlohmann::json to_json(const NcisReport& r);
/// Returns an empty string when `j` has every field of the report schema
/// with the right type, otherwise a description of the first problem.
std::string validate_report(const nlohmann::json& j);

/// Step-wise capped importance weights min(pi(a_t|s_t) / pi_b(a_t|s_t), cap),
/// with gamma^t counted from the start of each trajectory.
/// `target_probability[i]` is pi(a_i | s_i) for transition i of the dataset.
NcisReport ncis(const feedsim::LoggedDataset& data, std::span<const double> target_probability,
                const NcisConfig& config);

/// Same estimator over explicit arrays; all spans have equal length.
NcisReport ncis(std::span<const double> rewards, std::span<const double> ratios,
                std::span<const int> steps, std::size_t num_trajectories, const NcisConfig& config);

/// Percentile interval of the estimate over trajectory-level resamples.
struct BootstrapInterval {
  double lower = 0.0;
  double upper = 0.0;
};
BootstrapInterval bootstrap_ncis(const feedsim::LoggedDataset& data,
                                 std::span<const double> target_probability,
                                 const NcisConfig& config, int resamples, double level,
                                 std::uint64_t seed);

/// Probability of the logged action under an epsilon-greedy policy around
/// p(s, 1) for each transition.
std::vector<double> epsilon_greedy_logged_probability(const feedsim::LoggedDataset& data,
                                                      std::span<const double> inject_probability,
                                                      double epsilon);

}  // namespace slmgac::ope
