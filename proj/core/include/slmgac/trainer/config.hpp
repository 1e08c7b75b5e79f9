#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "slmgac/critic/critic.hpp"
#include "slmgac/critic/time_bins.hpp"
#include "slmgac/encoder/encoder.hpp"
#include "slmgac/mgsd/multi_group_net.hpp"

namespace slmgac::trainer {

struct AblationFlags {
  bool no_mg = false;          // K = 1
  bool no_dd = false;          // one interval per medium: ratio = y / 1200
  bool no_sl = false;          // drop the supervised ratio loss
  bool no_ln = false;          // no layer norm in front of the group heads
  bool no_sg = false;          // actor loss also trains the shared encoder
  bool no_qnorm = false;       // raw Q as the actor weight
  bool gamma_zero = false;     // gamma = 0
  bool sep_actor = false;      // actor updated in its own pass after the critic step
  bool vanilla_label = false;  // expectation over the actor instead of max

  bool operator==(const AblationFlags&) const = default;
};

void to_json(nlohmann::json& j, const AblationFlags& f);
void from_json(const nlohmann::json& j, AblationFlags& f);
/// Sets the flag called `name` (e.g. "no_mg"); throws ConfigError if unknown.
void set_flag(AblationFlags& f, const std::string& name);

struct ModelConfig {
  encoder::EncoderConfig encoder;
  mgsd::TowerTemplates towers;
  critic::TimeBinSpec bins;
  int K = 6;
  bool layer_norm = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
/// FNV-1a over the JSON dump; identifies the architecture a snapshot belongs to.
std::uint64_t config_digest(const ModelConfig& c);

struct TargetSyncConfig {
  critic::SyncMode mode = critic::SyncMode::hard;
  int period = 100;   // hard copy every `period` updates
  double tau = 0.005; // polyak rate per update
};

struct StreamingConfig {
  int num_users = 2000;
  int requests_per_step = 64;   // simulator requests served between updates
  int replay_capacity = 200000;
  double epsilon = 0.2;
  int publish_interval = 10;    // updates between snapshot publications
};

struct TrainConfig {
  int batch_size = 2048;
  int epochs = 500;
  std::int64_t steps = 0;  // 0: derived from epochs
  double lr_embedding = 1e-5;
  double lr_hidden = 1e-3;
  double gamma = 0.9;
  int K = 6;
  std::optional<double> lambda;  // empty: taken from the dataset's SimConfig
  double huber_delta = 1.0;
  double tau_r = 100.0;
  TargetSyncConfig sync;
  std::uint64_t seed = 0;
  double grad_clip = 10.0;
  int probe_size = 4096;
  int eval_interval = 1;      // updates between metrics rows
  int collapse_window = 50;   // consecutive pinned probes that flag a collapse
  bool record_wall_ms = false;  // wall_ms stays 0 so repeated runs match byte for byte
  std::string mode = "offline";  // offline | streaming
  int checkpoint_interval = 0;   // 0: final checkpoint only
  StreamingConfig streaming;
  AblationFlags ablation;
  ModelConfig model;

  double effective_gamma() const { return ablation.gamma_zero ? 0.0 : gamma; }
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Architecture after applying K and the structural ablations (no_mg, no_dd, no_ln).
ModelConfig effective_model_config(const TrainConfig& c);

}  // namespace slmgac::trainer
