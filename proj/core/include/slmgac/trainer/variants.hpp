#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slmgac/feedsim/log.hpp"
#include "slmgac/ope/ncis.hpp"
#include "slmgac/trainer/config.hpp"
#include "slmgac/trainer/trainer.hpp"

namespace slmgac::trainer {

struct VariantSpec {
  std::string name;
  AblationFlags flags;
};

/// The ablation variants, full model first.
std::vector<VariantSpec> ablation_variants();
/// Throws ConfigError for an unknown name.
VariantSpec variant_by_name(const std::string& name);

struct EvalSettings {
  ope::NcisConfig ncis;
  double epsilon = 0.2;  // exploration around the actor's argmax
};

void to_json(nlohmann::json& j, const EvalSettings& e);
void from_json(const nlohmann::json& j, EvalSettings& e);

/// pi(a_t | s_t) of the epsilon-greedy policy around the model's actor for
/// every transition, grouping users the way the model was trained.
std::vector<double> target_probabilities(Model& model, const feedsim::LoggedDataset& data,
                                         const feedsim::LoggedDataset& reference, double epsilon);

struct SuiteRow {
  std::string variant;
  std::uint64_t seed = 0;
  int K = 0;
  ope::NcisReport report;
  double q_std = 0.0;
  double final_alloc_ratio = 0.0;
  bool collapsed = false;
  std::string label_kind;
};

struct SuiteAggregate {
  std::string variant;
  int K = 0;
  std::size_t runs = 0;
  double mean = 0.0;  // of the NCIS estimate
  double std = 0.0;
  double mean_cumulative = 0.0;
  std::size_t collapsed = 0;
};

struct SuiteResult {
  std::vector<SuiteRow> rows;
  std::vector<SuiteAggregate> aggregate;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Trains each variant on the same data for every seed and evaluates it with
/// NCIS on `test`.
SuiteResult run_variant_suite(const feedsim::LoggedDataset& train_data,
                              const feedsim::LoggedDataset& test_data, const TrainConfig& base,
                              const std::vector<VariantSpec>& variants,
                              const std::vector<std::uint64_t>& seeds, const EvalSettings& eval);

/// Full model for every K and seed; aggregate rows give (K, mean, std).
SuiteResult run_k_sweep(const feedsim::LoggedDataset& train_data,
                        const feedsim::LoggedDataset& test_data, const TrainConfig& base,
                        const std::vector<int>& Ks, const std::vector<std::uint64_t>& seeds,
                        const EvalSettings& eval);

}  // namespace slmgac::trainer
