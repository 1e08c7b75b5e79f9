#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slmgac/feedsim/config.hpp"
#include "slmgac/trainer/config.hpp"
#include "slmgac/trainer/variants.hpp"

namespace slmgac::cli {

inline constexpr const char* kRunConfigSchema = "slmgac.run_config";
inline constexpr int kRunConfigSchemaVersion = 1;

struct DataSettings {
  int num_users = 2000;
  int steps = 30;  // max requests per session
  std::string behavior_policy = "group_heuristic";
  int holdout_every = 5;
};

struct StabilitySettings {
  int window = 1200;  // probe evaluations per sliding window
  int bins = 20;      // amplitude histogram bins over [0, 1]
};

/// Everything a subcommand reads. Serialized into every output directory.
struct RunConfig {
  feedsim::SimConfig sim;
  DataSettings data;
  trainer::TrainConfig train;
  trainer::EvalSettings eval;
  std::vector<std::string> variants;  // empty: all of them
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<int> sweep_K{1, 2, 4, 6, 8};
  StabilitySettings stability;
};

nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults; validates the result.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Sets the value at a dotted path ("train.sync.period=20"). The right-hand
/// side is parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Defaults, then the optional file, then the overrides in order.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

feedsim::BehaviorPolicy behavior_policy_by_name(const std::string& name,
                                                const feedsim::SimConfig& sim);

void write_run_config(const RunConfig& c, const std::string& out_dir);

}  // namespace slmgac::cli
