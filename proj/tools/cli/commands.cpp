#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "stability.hpp"
#include "slmgac/errors.hpp"
#include "slmgac/feedsim/log.hpp"
#include "slmgac/ope/ncis.hpp"
#include "slmgac/trainer/snapshot.hpp"
#include "slmgac/trainer/trainer.hpp"
#include "slmgac/trainer/variants.hpp"

namespace slmgac::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON run config");
  cmd->add_option("--set", c.overrides, "override a dotted config path, e.g. train.K=4");
  cmd->add_option("-o,--out", c.out, "output directory")->required();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  os << text;
  if (!os) throw DataError("cannot write " + path.string());
}

std::pair<feedsim::LoggedDataset, feedsim::LoggedDataset> simulated_split(const RunConfig& rc) {
  const auto data = feedsim::simulate(rc.sim, behavior_policy_by_name(rc.data.behavior_policy, rc.sim),
                                      rc.data.num_users, rc.data.steps);
  return feedsim::split_by_trajectory(data, rc.data.holdout_every);
}

feedsim::LoggedDataset read_dataset(const std::string& path) {
  if (!fs::exists(path)) throw DataError("dataset '" + path + "' does not exist");
  return feedsim::read_log(path);
}

/// Training and test sets from files when given, otherwise simulated from the config.
std::pair<feedsim::LoggedDataset, feedsim::LoggedDataset> datasets(const RunConfig& rc,
                                                                   const std::string& train_path,
                                                                   const std::string& test_path) {
  if (train_path.empty() && test_path.empty()) return simulated_split(rc);
  if (train_path.empty() || test_path.empty()) {
    throw ConfigError("--train-data and --test-data must be given together");
  }
  return {read_dataset(train_path), read_dataset(test_path)};
}

int cmd_simulate(const Common& c, std::optional<std::uint64_t> seed, std::optional<int> users,
                 std::optional<int> steps, std::ostream& out) {
  std::vector<std::string> overrides = c.overrides;
  if (seed) overrides.push_back("sim.seed=" + std::to_string(*seed));
  if (users) overrides.push_back("data.num_users=" + std::to_string(*users));
  if (steps) overrides.push_back("data.steps=" + std::to_string(*steps));
  const RunConfig rc = load_run_config(c.config, overrides);
  write_run_config(rc, c.out);
  const fs::path dir(c.out);
  std::ofstream all(dir / "dataset.jsonl", std::ios::trunc);
  std::ofstream train(dir / "train.jsonl", std::ios::trunc);
  std::ofstream test(dir / "test.jsonl", std::ios::trunc);
  if (!all || !train || !test) throw DataError("cannot open dataset files in '" + c.out + "'");
  feedsim::generate_log(rc.sim, behavior_policy_by_name(rc.data.behavior_policy, rc.sim),
                        rc.data.num_users, rc.data.steps, rc.data.holdout_every, all, train, test);
  out << "wrote " << (dir / "dataset.jsonl").string() << '\n';
  return kExitOk;
}

int cmd_train(const Common& c, const std::string& data_path, const std::string& probe_path,
              const std::vector<std::string>& ablations, std::optional<std::uint64_t> seed,
              std::optional<std::int64_t> steps, std::ostream& out) {
  std::vector<std::string> overrides = c.overrides;
  for (const auto& a : ablations) {
    trainer::AblationFlags known;
    trainer::set_flag(known, a);
    overrides.push_back("train.ablation." + a + "=true");
  }
  if (seed) overrides.push_back("train.seed=" + std::to_string(*seed));
  if (steps) overrides.push_back("train.steps=" + std::to_string(*steps));
  RunConfig rc = load_run_config(c.config, overrides);
  write_run_config(rc, c.out);

  trainer::TrainOptions opts;
  opts.out_dir = c.out;
  trainer::TrainResult result;
  if (rc.train.mode == "streaming") {
    result = trainer::train_streaming(rc.sim, rc.train, opts);
  } else {
    feedsim::LoggedDataset train_data, probe_data;
    if (data_path.empty()) {
      std::tie(train_data, probe_data) = simulated_split(rc);
    } else {
      train_data = read_dataset(data_path);
      if (!probe_path.empty()) probe_data = read_dataset(probe_path);
    }
    if (!probe_data.transitions.empty()) opts.probe = &probe_data;
    result = trainer::train(train_data, rc.train, opts);
  }
  out << "trained " << result.steps << " steps, K " << result.model.config().K << ", collapsed "
      << (result.collapsed ? "yes" : "no") << '\n';
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& policy, const std::string& data_path,
             std::optional<double> cap, std::ostream& out) {
  std::vector<std::string> overrides = c.overrides;
  if (cap) overrides.push_back("eval.ncis.cap=" + json(*cap).dump());
  const RunConfig rc = load_run_config(c.config, overrides);
  write_run_config(rc, c.out);
  const auto data = read_dataset(data_path);

  std::vector<double> target;
  if (policy == "behavior") {
    for (const auto& t : data.transitions) target.push_back(t.behavior_propensity);
  } else {
    if (!fs::exists(policy)) throw DataError("policy snapshot '" + policy + "' does not exist");
    const trainer::SnapshotPolicy acting(trainer::load_snapshot(policy));
    const int K = acting.config().K;
    std::unique_ptr<feedsim::GroupAssigner> assigner;
    if (K != data.config.K) {
      std::map<int, double> users;
      for (const auto& t : data.transitions) users.emplace(t.user_id, t.trailing_live_watch);
      assigner = std::make_unique<feedsim::GroupAssigner>(
          std::vector<std::pair<int, double>>(users.begin(), users.end()), K);
    }
    encoder::StateBatch states;
    std::vector<int> groups;
    for (const auto& t : data.transitions) {
      states.push_back(&t.state);
      groups.push_back(assigner ? assigner->group_of(t.user_id, t.trailing_live_watch) : t.group_id);
    }
    const auto p1 = acting.inject_probabilities(states, groups);
    target = ope::epsilon_greedy_logged_probability(data, p1, rc.eval.epsilon);
  }
  const auto report = ope::ncis(data, target, rc.eval.ncis);
  json j = ope::to_json(report);
  j["policy"] = policy;
  write_text(fs::path(c.out) / "ncis_report.json", j.dump(2) + "\n");
  out << j.dump(2) << '\n';
  return kExitOk;
}

void write_suite(const trainer::SuiteResult& r, const fs::path& dir, const std::string& stem) {
  write_text(dir / (stem + ".json"), r.to_json().dump(2) + "\n");
  write_text(dir / (stem + ".csv"), r.to_csv());
}

int cmd_suite(const Common& c, const std::string& train_path, const std::string& test_path,
              std::ostream& out) {
  const RunConfig rc = load_run_config(c.config, c.overrides);
  write_run_config(rc, c.out);
  const auto [train_data, test_data] = datasets(rc, train_path, test_path);
  std::vector<trainer::VariantSpec> variants;
  if (rc.variants.empty()) {
    variants = trainer::ablation_variants();
  } else {
    for (const auto& v : rc.variants) variants.push_back(trainer::variant_by_name(v));
  }
  const auto result = trainer::run_variant_suite(train_data, test_data, rc.train, variants,
                                                 rc.seeds, rc.eval);
  write_suite(result, c.out, "suite");
  out << result.to_csv();
  return kExitOk;
}

int cmd_sweep_k(const Common& c, const std::string& train_path, const std::string& test_path,
                std::ostream& out) {
  const RunConfig rc = load_run_config(c.config, c.overrides);
  write_run_config(rc, c.out);
  const auto [train_data, test_data] = datasets(rc, train_path, test_path);
  const auto result =
      trainer::run_k_sweep(train_data, test_data, rc.train, rc.sweep_K, rc.seeds, rc.eval);
  write_suite(result, c.out, "sweep");
  std::ostringstream plot;
  plot.precision(17);
  plot << "K,mean,std\n";
  for (const auto& a : result.aggregate) plot << a.K << ',' << a.mean << ',' << a.std << '\n';
  write_text(fs::path(c.out) / "sweep_plot.csv", plot.str());
  out << plot.str();
  return kExitOk;
}

int cmd_stability(const Common& c, const std::vector<std::string>& metrics, std::ostream& out) {
  const RunConfig rc = load_run_config(c.config, c.overrides);
  write_run_config(rc, c.out);
  json runs = json::array();
  std::ostringstream density;
  density.precision(17);
  density << "run,bin_lo,bin_hi,density\n";
  for (const auto& path : metrics) {
    if (!fs::exists(path)) throw DataError("metrics file '" + path + "' does not exist");
    std::vector<double> series;
    for (const auto& row : trainer::read_metrics_csv(path)) series.push_back(row.alloc_ratio);
    const auto stats = amplitude_stats(path, series, static_cast<std::size_t>(rc.stability.window),
                                       static_cast<std::size_t>(rc.stability.bins));
    runs.push_back(to_json(stats));
    for (std::size_t b = 0; b < stats.density.size(); ++b) {
      density << '"' << path << "\"," << stats.bin_edges[b] << ',' << stats.bin_edges[b + 1] << ','
              << stats.density[b] << '\n';
    }
  }
  const json report = {{"schema", "slmgac.stability"},
                       {"schema_version", 1},
                       {"window", rc.stability.window},
                       {"runs", runs}};
  write_text(fs::path(c.out) / "stability.json", report.dump(2) + "\n");
  write_text(fs::path(c.out) / "stability_density.csv", density.str());
  out << report.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"slmgac: live-stream injection with a multi-group actor-critic"};
  app.require_subcommand(1);

  Common sim_c, train_c, eval_c, suite_c, sweep_c, stab_c;
  std::optional<std::uint64_t> sim_seed, train_seed;
  std::optional<int> sim_users, sim_steps;
  std::optional<std::int64_t> train_steps;
  std::optional<double> eval_cap;
  std::string train_data, train_probe, eval_policy, eval_data;
  std::string suite_train, suite_test, sweep_train, sweep_test;
  std::vector<std::string> ablations, stab_metrics;

  auto* sim = app.add_subcommand("simulate", "generate a logged dataset and its train/test split");
  add_common(sim, sim_c);
  sim->add_option("--seed", sim_seed, "simulator seed");
  sim->add_option("--users", sim_users, "number of users");
  sim->add_option("--steps", sim_steps, "max requests per session");

  auto* tr = app.add_subcommand("train", "train SL-MGAC on a logged dataset");
  add_common(tr, train_c);
  tr->add_option("--data", train_data, "training dataset (default: simulate from the config)");
  tr->add_option("--probe", train_probe, "held-out dataset for probe states");
  tr->add_option("--ablation", ablations, "ablation flag, e.g. no_mg (repeatable)");
  tr->add_option("--seed", train_seed, "training seed");
  tr->add_option("--steps", train_steps, "update budget (overrides epochs)");

  auto* ev = app.add_subcommand("eval", "NCIS evaluation of a policy snapshot");
  add_common(ev, eval_c);
  ev->add_option("--policy", eval_policy, "snapshot file or 'behavior'")->required();
  ev->add_option("--data", eval_data, "evaluation dataset")->required();
  ev->add_option("--cap", eval_cap, "importance weight cap");

  auto* su = app.add_subcommand("suite", "ablation suite over variants and seeds");
  add_common(su, suite_c);
  su->add_option("--train-data", suite_train, "training dataset");
  su->add_option("--test-data", suite_test, "evaluation dataset");

  auto* sw = app.add_subcommand("sweep-k", "NCIS value as a function of the group count K");
  add_common(sw, sweep_c);
  sw->add_option("--train-data", sweep_train, "training dataset");
  sw->add_option("--test-data", sweep_test, "evaluation dataset");

  auto* st = app.add_subcommand("stability", "sliding-window allocation-ratio amplitudes");
  add_common(st, stab_c);
  st->add_option("metrics", stab_metrics, "metrics.csv files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream usage_out, usage_err;
    const int code = app.exit(e, usage_out, usage_err);
    out << usage_out.str();
    err << usage_err.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_c, sim_seed, sim_users, sim_steps, out);
    if (tr->parsed()) return cmd_train(train_c, train_data, train_probe, ablations, train_seed, train_steps, out);
    if (ev->parsed()) return cmd_eval(eval_c, eval_policy, eval_data, eval_cap, out);
    if (su->parsed()) return cmd_suite(suite_c, suite_train, suite_test, out);
    if (sw->parsed()) return cmd_sweep_k(sweep_c, sweep_train, sweep_test, out);
    if (st->parsed()) return cmd_stability(stab_c, stab_metrics, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace slmgac::cli
