#include "run_config.hpp"

#include <filesystem>
#include <fstream>

#include "slmgac/errors.hpp"

namespace slmgac::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

json to_json(const RunConfig& c) {
  return json{{"schema", kRunConfigSchema},
              {"schema_version", kRunConfigSchemaVersion},
              {"sim", c.sim},
              {"data",
               {{"num_users", c.data.num_users},
                {"steps", c.data.steps},
                {"behavior_policy", c.data.behavior_policy},
                {"holdout_every", c.data.holdout_every}}},
              {"train", c.train},
              {"eval", c.eval},
              {"variants", c.variants},
              {"seeds", c.seeds},
              {"sweep_K", c.sweep_K},
              {"stability", {{"window", c.stability.window}, {"bins", c.stability.bins}}}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kRunConfigSchemaVersion) {
      throw ConfigError("unsupported run config schema_version " + j.at("schema_version").dump());
    }
    read_opt(j, "sim", c.sim);
    if (j.contains("data")) {
      const auto& d = j.at("data");
      read_opt(d, "num_users", c.data.num_users);
      read_opt(d, "steps", c.data.steps);
      read_opt(d, "behavior_policy", c.data.behavior_policy);
      read_opt(d, "holdout_every", c.data.holdout_every);
    }
    read_opt(j, "train", c.train);
    read_opt(j, "eval", c.eval);
    read_opt(j, "variants", c.variants);
    read_opt(j, "seeds", c.seeds);
    read_opt(j, "sweep_K", c.sweep_K);
    if (j.contains("stability")) {
      read_opt(j.at("stability"), "window", c.stability.window);
      read_opt(j.at("stability"), "bins", c.stability.bins);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  c.sim.validate();
  c.train.validate();
  if (c.data.num_users < 1 || c.data.steps < 1) throw ConfigError("data.num_users and data.steps must be >= 1");
  if (c.data.holdout_every < 2) throw ConfigError("data.holdout_every must be >= 2");
  if (c.stability.window < 1 || c.stability.bins < 1) throw ConfigError("stability.window and stability.bins must be >= 1");
  for (const auto& v : c.variants) trainer::variant_by_name(v);
  behavior_policy_by_name(c.data.behavior_policy, c.sim);
  return c;
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string pointer;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const auto end = dot == std::string::npos ? path.size() : dot;
    if (end == start) throw ConfigError("override path '" + path + "' has an empty segment");
    pointer += "/" + path.substr(start, end - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  tree[json::json_pointer(pointer)] = value;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  json tree = to_json(RunConfig{});
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file '" + path + "'");
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    tree.merge_patch(file);
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return run_config_from_json(tree);
}

feedsim::BehaviorPolicy behavior_policy_by_name(const std::string& name,
                                                const feedsim::SimConfig& sim) {
  if (name == "group_heuristic") return feedsim::group_heuristic_policy(sim);
  if (name == "uniform") return feedsim::uniform_policy();
  if (name == "always_inject") return feedsim::always_inject_policy();
  if (name == "never_inject") return feedsim::never_inject_policy();
  throw ConfigError("unknown behavior policy '" + name + "'");
}

void write_run_config(const RunConfig& c, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "run_config.json", std::ios::trunc);
  os << to_json(c).dump(2) << '\n';
  if (!os) throw DataError("cannot write run_config.json to '" + out_dir + "'");
}

}  // namespace slmgac::cli
