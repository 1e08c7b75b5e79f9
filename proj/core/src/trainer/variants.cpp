#include "slmgac/trainer/variants.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "slmgac/errors.hpp"

namespace slmgac::trainer {

using nlohmann::json;

std::vector<VariantSpec> ablation_variants() {
  std::vector<VariantSpec> v;
  const auto add = [&](std::string name, auto setter) {
    AblationFlags f;
    setter(f);
    v.push_back({std::move(name), f});
  };
  add("SL-MGAC", [](AblationFlags&) {});
  add("SL-MGAC (w/o MG)", [](AblationFlags& f) { f.no_mg = true; });
  add("SL-MGAC (w/o MG & DD)", [](AblationFlags& f) { f.no_mg = f.no_dd = true; });
  add("SL-MGAC (w/o MG & DD & SL)", [](AblationFlags& f) { f.no_mg = f.no_dd = f.no_sl = true; });
  add("SL-MGAC (w/o LN)", [](AblationFlags& f) { f.no_ln = true; });
  add("SL-MGAC (w/o SG)", [](AblationFlags& f) { f.no_sg = true; });
  add("SL-MGAC (w/o Q-norm)", [](AblationFlags& f) { f.no_qnorm = true; });
  add("SL-MGAC-0", [](AblationFlags& f) { f.gamma_zero = true; });
  add("SL-MGAC-sep", [](AblationFlags& f) { f.sep_actor = true; });
  add("SL-MGAC-vanilla", [](AblationFlags& f) { f.vanilla_label = true; });
  return v;
}

VariantSpec variant_by_name(const std::string& name) {
  for (auto& v : ablation_variants()) {
    if (v.name == name) return v;
  }
  throw ConfigError("unknown variant '" + name + "'");
}

void to_json(json& j, const EvalSettings& e) {
  j = json{{"ncis", e.ncis}, {"epsilon", e.epsilon}};
}

void from_json(const json& j, EvalSettings& e) {
  if (j.contains("ncis")) j.at("ncis").get_to(e.ncis);
  if (j.contains("epsilon")) j.at("epsilon").get_to(e.epsilon);
}

std::vector<double> target_probabilities(Model& model, const feedsim::LoggedDataset& data,
                                         const feedsim::LoggedDataset& reference, double epsilon) {
  const int K = model.config().K;
  std::unique_ptr<feedsim::GroupAssigner> assigner;
  if (K != reference.config.K) {
    std::map<int, double> users;
    for (const auto& t : reference.transitions) users.emplace(t.user_id, t.trailing_live_watch);
    assigner = std::make_unique<feedsim::GroupAssigner>(
        std::vector<std::pair<int, double>>(users.begin(), users.end()), K);
  }
  std::vector<const encoder::StateFeatures*> states;
  std::vector<int> groups;
  for (const auto& t : data.transitions) {
    states.push_back(&t.state);
    groups.push_back(assigner ? assigner->group_of(t.user_id, t.trailing_live_watch) : t.group_id);
  }
  const auto p1 = inject_probabilities(model.encoder, model.actor, states, groups);
  return ope::epsilon_greedy_logged_probability(data, p1, epsilon);
}

namespace {

SuiteRow run_one(const feedsim::LoggedDataset& train_data, const feedsim::LoggedDataset& test_data,
                 TrainConfig cfg, const std::string& name, std::uint64_t seed,
                 const EvalSettings& eval) {
  cfg.seed = seed;
  TrainOptions opts;
  opts.probe = &test_data;
  auto result = train(train_data, cfg, opts);
  const auto probs = target_probabilities(result.model, test_data, train_data, eval.epsilon);
  SuiteRow row;
  row.variant = name;
  row.seed = seed;
  row.K = result.model.config().K;
  row.report = ope::ncis(test_data, probs, eval.ncis);
  row.q_std = q_std(result.metrics);
  row.final_alloc_ratio = result.metrics.empty() ? 0.0 : result.metrics.back().alloc_ratio;
  row.collapsed = result.collapsed;
  row.label_kind = result.label_kind;
  return row;
}

void aggregate(SuiteResult& out) {
  std::vector<std::pair<std::string, int>> keys;
  for (const auto& r : out.rows) {
    const std::pair<std::string, int> key{r.variant, r.K};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [variant, K] : keys) {
    SuiteAggregate a;
    a.variant = variant;
    a.K = K;
    std::vector<double> xs;
    for (const auto& r : out.rows) {
      if (r.variant != variant || r.K != K) continue;
      xs.push_back(r.report.estimate);
      a.mean_cumulative += r.report.cumulative;
      a.collapsed += r.collapsed;
    }
    a.runs = xs.size();
    for (double x : xs) a.mean += x;
    a.mean /= static_cast<double>(xs.size());
    a.mean_cumulative /= static_cast<double>(xs.size());
    for (double x : xs) a.std += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(a.std / static_cast<double>(xs.size()));
    out.aggregate.push_back(a);
  }
}

}  // namespace

json SuiteResult::to_json() const {
  json j;
  j["rows"] = json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"variant", r.variant},
                         {"seed", r.seed},
                         {"K", r.K},
                         {"ncis", ope::to_json(r.report)},
                         {"q_std", r.q_std},
                         {"final_alloc_ratio", r.final_alloc_ratio},
                         {"collapsed", r.collapsed},
                         {"label_kind", r.label_kind}});
  }
  j["aggregate"] = json::array();
  for (const auto& a : aggregate) {
    j["aggregate"].push_back({{"variant", a.variant},
                              {"K", a.K},
                              {"runs", a.runs},
                              {"mean", a.mean},
                              {"std", a.std},
                              {"mean_cumulative", a.mean_cumulative},
                              {"collapsed", a.collapsed}});
  }
  return j;
}

std::string SuiteResult::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "variant,seed,K,estimate,cumulative,ess,clip_fraction,q_std,final_alloc_ratio,collapsed\n";
  for (const auto& r : rows) {
    os << '"' << r.variant << "\"," << r.seed << ',' << r.K << ',' << r.report.estimate << ','
       << r.report.cumulative << ',' << r.report.effective_sample_size << ','
       << r.report.clip_fraction << ',' << r.q_std << ',' << r.final_alloc_ratio << ','
       << (r.collapsed ? 1 : 0) << '\n';
  }
  for (const auto& a : aggregate) {
    os << '"' << a.variant << "\",all," << a.K << ',' << a.mean << ',' << a.mean_cumulative
       << ",,," << a.std << ",," << a.collapsed << '\n';
  }
  return os.str();
}

SuiteResult run_variant_suite(const feedsim::LoggedDataset& train_data,
                              const feedsim::LoggedDataset& test_data, const TrainConfig& base,
                              const std::vector<VariantSpec>& variants,
                              const std::vector<std::uint64_t>& seeds, const EvalSettings& eval) {
  SuiteResult out;
  for (const auto& v : variants) {
    TrainConfig cfg = base;
    cfg.ablation = v.flags;
    for (auto seed : seeds) out.rows.push_back(run_one(train_data, test_data, cfg, v.name, seed, eval));
  }
  aggregate(out);
  return out;
}

SuiteResult run_k_sweep(const feedsim::LoggedDataset& train_data,
                        const feedsim::LoggedDataset& test_data, const TrainConfig& base,
                        const std::vector<int>& Ks, const std::vector<std::uint64_t>& seeds,
                        const EvalSettings& eval) {
  SuiteResult out;
  for (int K : Ks) {
    TrainConfig cfg = base;
    cfg.K = K;
    cfg.ablation.no_mg = false;
    for (auto seed : seeds) {
      out.rows.push_back(run_one(train_data, test_data, cfg, "SL-MGAC", seed, eval));
    }
  }
  aggregate(out);
  return out;
}

}  // namespace slmgac::trainer
