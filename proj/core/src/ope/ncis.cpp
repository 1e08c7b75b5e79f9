#include "slmgac/ope/ncis.hpp"

#include <algorithm>
#include <cmath>

#include "slmgac/actor/actor.hpp"
#include "slmgac/errors.hpp"
#include "slmgac/random.hpp"

namespace slmgac::ope {

using nlohmann::json;

void to_json(json& j, const NcisConfig& c) {
  j = json{{"cap", std::isinf(c.cap) ? json("inf") : json(c.cap)}, {"gamma", c.gamma}};
}

void from_json(const json& j, NcisConfig& c) {
  if (auto it = j.find("cap"); it != j.end()) {
    c.cap = it->is_string() && it->get<std::string>() == "inf"
                ? std::numeric_limits<double>::infinity()
                : it->get<double>();
  }
  if (auto it = j.find("gamma"); it != j.end()) it->get_to(c.gamma);
}

json to_json(const NcisReport& r) {
  return json{{"schema", "slmgac.ncis_report"},
              {"schema_version", kReportSchemaVersion},
              {"estimator", "ncis"},
              {"granularity", "stepwise"},
              {"estimate", r.estimate},
              {"raw_sum", r.raw_sum},
              {"weight_sum", r.weight_sum},
              {"cumulative", r.cumulative},
              {"num_trajectories", r.num_trajectories},
              {"num_transitions", r.num_transitions},
              {"effective_sample_size", r.effective_sample_size},
              {"clip_fraction", r.clip_fraction},
              {"cap", std::isinf(r.config.cap) ? json("inf") : json(r.config.cap)},
              {"gamma", r.config.gamma}};
}

std::string validate_report(const json& j) {
  if (!j.is_object()) return "report is not an object";
  if (j.value("schema", "") != "slmgac.ncis_report") return "schema must be slmgac.ncis_report";
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"] != kReportSchemaVersion) {
    return "schema_version must be " + std::to_string(kReportSchemaVersion);
  }
  for (const char* k : {"estimator", "granularity"}) {
    if (!j.contains(k) || !j[k].is_string()) return std::string(k) + " must be a string";
  }
  for (const char* k : {"estimate", "raw_sum", "weight_sum", "cumulative",
                        "effective_sample_size", "clip_fraction", "gamma"}) {
    if (!j.contains(k) || !j[k].is_number()) return std::string(k) + " must be a number";
  }
  for (const char* k : {"num_trajectories", "num_transitions"}) {
    if (!j.contains(k) || !j[k].is_number_unsigned()) {
      return std::string(k) + " must be a non-negative integer";
    }
  }
  if (!j.contains("cap") || !(j["cap"].is_number() || j["cap"] == "inf")) {
    return "cap must be a number or \"inf\"";
  }
  const double clip = j["clip_fraction"].get<double>();
  if (clip < 0.0 || clip > 1.0) return "clip_fraction must lie in [0, 1]";
  return {};
}

NcisReport ncis(std::span<const double> rewards, std::span<const double> ratios,
                std::span<const int> steps, std::size_t num_trajectories,
                const NcisConfig& config) {
  if (rewards.size() != ratios.size() || rewards.size() != steps.size()) {
    throw DimensionError("ncis: rewards, ratios and steps differ in length");
  }
  if (!(config.cap > 0.0)) throw ConfigError("ncis: cap must be positive");
  NcisReport r;
  r.config = config;
  r.num_trajectories = num_trajectories;
  r.num_transitions = rewards.size();
  double sq = 0.0;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    if (!(ratios[i] >= 0.0) || !std::isfinite(ratios[i])) {
      throw DataError("ncis: invalid importance ratio at transition " + std::to_string(i));
    }
    double w = ratios[i];
    if (w > config.cap) {
      w = config.cap;
      ++clipped;
    }
    r.raw_sum += w * std::pow(config.gamma, steps[i]) * rewards[i];
    r.weight_sum += w;
    sq += w * w;
  }
  if (r.weight_sum > 0.0) {
    r.estimate = r.raw_sum / r.weight_sum;
    r.effective_sample_size = r.weight_sum * r.weight_sum / sq;
  }
  r.cumulative = r.estimate * static_cast<double>(num_trajectories);
  r.clip_fraction = rewards.empty() ? 0.0 : static_cast<double>(clipped) / rewards.size();
  return r;
}

NcisReport ncis(const feedsim::LoggedDataset& data, std::span<const double> target_probability,
                const NcisConfig& config) {
  const auto& ts = data.transitions;
  if (target_probability.size() != ts.size()) {
    throw DimensionError("ncis: one target probability per transition required");
  }
  std::vector<double> rewards(ts.size());
  std::vector<double> ratios(ts.size());
  std::vector<int> steps(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& t = ts[i];
    if (!(t.behavior_propensity > 0.0)) {
      throw DataError("ncis: zero behavior propensity at trajectory " +
                      std::to_string(t.trajectory_id) + " step " + std::to_string(t.step));
    }
    rewards[i] = t.reward;
    ratios[i] = target_probability[i] / t.behavior_propensity;
    steps[i] = t.step;
  }
  return ncis(rewards, ratios, steps, data.num_trajectories(), config);
}

BootstrapInterval bootstrap_ncis(const feedsim::LoggedDataset& data,
                                 std::span<const double> target_probability,
                                 const NcisConfig& config, int resamples, double level,
                                 std::uint64_t seed) {
  if (resamples < 1 || !(level > 0.0 && level < 1.0)) {
    throw ConfigError("bootstrap: need resamples >= 1 and level in (0, 1)");
  }
  const auto ranges = data.trajectories();
  if (ranges.empty()) return {};
  Rng rng = make_rng(seed, 0x626f6f74ull);
  std::vector<double> estimates;
  estimates.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> rewards, ratios;
  std::vector<int> steps;
  for (int r = 0; r < resamples; ++r) {
    rewards.clear();
    ratios.clear();
    steps.clear();
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      const auto pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(ranges.size())) % ranges.size();
      for (auto i = ranges[pick].first; i < ranges[pick].second; ++i) {
        const auto& t = data.transitions[i];
        rewards.push_back(t.reward);
        ratios.push_back(target_probability[i] / t.behavior_propensity);
        steps.push_back(t.step);
      }
    }
    estimates.push_back(ncis(rewards, ratios, steps, ranges.size(), config).estimate);
  }
  std::sort(estimates.begin(), estimates.end());
  const auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(estimates.size() - 1) + 0.5);
    return estimates[std::min(idx, estimates.size() - 1)];
  };
  const double tail = (1.0 - level) / 2.0;
  return {at(tail), at(1.0 - tail)};
}

std::vector<double> epsilon_greedy_logged_probability(const feedsim::LoggedDataset& data,
                                                      std::span<const double> inject_probability,
                                                      double epsilon) {
  if (inject_probability.size() != data.transitions.size()) {
    throw DimensionError("ncis: one policy output per transition required");
  }
  std::vector<double> out(inject_probability.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double p1 = inject_probability[i];
    out[i] = actor::epsilon_greedy_probability({1.0 - p1, p1}, epsilon, data.transitions[i].action);
  }
  return out;
}

}  // namespace slmgac::ope
