#include "slmgac/trainer/config.hpp"

#include "slmgac/errors.hpp"

namespace slmgac::trainer {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) it->get_to(field);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

void to_json(json& j, const AblationFlags& f) {
  j = json{{"no_mg", f.no_mg},           {"no_dd", f.no_dd},
           {"no_sl", f.no_sl},           {"no_ln", f.no_ln},
           {"no_sg", f.no_sg},           {"no_qnorm", f.no_qnorm},
           {"gamma_zero", f.gamma_zero}, {"sep_actor", f.sep_actor},
           {"vanilla_label", f.vanilla_label}};
}

void from_json(const json& j, AblationFlags& f) {
  read_opt(j, "no_mg", f.no_mg);
  read_opt(j, "no_dd", f.no_dd);
  read_opt(j, "no_sl", f.no_sl);
  read_opt(j, "no_ln", f.no_ln);
  read_opt(j, "no_sg", f.no_sg);
  read_opt(j, "no_qnorm", f.no_qnorm);
  read_opt(j, "gamma_zero", f.gamma_zero);
  read_opt(j, "sep_actor", f.sep_actor);
  read_opt(j, "vanilla_label", f.vanilla_label);
}

void set_flag(AblationFlags& f, const std::string& name) {
  json j = f;
  if (!j.contains(name)) throw ConfigError("unknown ablation flag '" + name + "'");
  j[name] = true;
  f = j.get<AblationFlags>();
}

void ModelConfig::validate() const {
  encoder.validate();
  bins.validate();
  if (K < 1) throw ConfigError("model: K must be at least 1");
  const auto dims = mgsd::head_output_dims(towers);
  if (dims.at("actor") != 2) throw ConfigError("model: actor tower must end in width 2");
  if (dims.at("qrn") != 2) throw ConfigError("model: residual tower must end in width 2");
  if (dims.at("rpn") != bins.width()) {
    throw ConfigError("model: ratio tower width " + std::to_string(dims.at("rpn")) +
                      " does not match " + std::to_string(bins.width()) + " time bins");
  }
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"encoder", c.encoder}, {"towers", c.towers}, {"bins", c.bins},
           {"K", c.K},             {"layer_norm", c.layer_norm}};
}

void from_json(const json& j, ModelConfig& c) {
  read_opt(j, "encoder", c.encoder);
  read_opt(j, "towers", c.towers);
  read_opt(j, "bins", c.bins);
  read_opt(j, "K", c.K);
  read_opt(j, "layer_norm", c.layer_norm);
}

std::uint64_t config_digest(const ModelConfig& c) { return fnv1a(json(c).dump()); }

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (epochs < 0 || steps < 0) throw ConfigError("train: epochs and steps must be >= 0");
  if (!(lr_embedding > 0.0) || !(lr_hidden > 0.0)) throw ConfigError("train: learning rates must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must lie in [0, 1]");
  if (K < 1) throw ConfigError("train: K must be at least 1");
  if (lambda && !(*lambda >= 0.0)) throw ConfigError("train: lambda must be >= 0");
  if (!(huber_delta > 0.0)) throw ConfigError("train: huber_delta must be positive");
  if (!(tau_r > 0.0)) throw ConfigError("train: tau_r must be positive");
  if (sync.period < 1) throw ConfigError("train: sync.period must be positive");
  if (!(sync.tau >= 0.0 && sync.tau <= 1.0)) throw ConfigError("train: sync.tau must lie in [0, 1]");
  if (!(grad_clip > 0.0)) throw ConfigError("train: grad_clip must be positive");
  if (probe_size < 1 || eval_interval < 1 || collapse_window < 1) {
    throw ConfigError("train: probe_size, eval_interval and collapse_window must be positive");
  }
  if (mode != "offline" && mode != "streaming") {
    throw ConfigError("train: mode must be 'offline' or 'streaming', got '" + mode + "'");
  }
  if (!(streaming.epsilon >= 0.0 && streaming.epsilon <= 1.0)) {
    throw ConfigError("train: streaming.epsilon must lie in [0, 1]");
  }
  if (streaming.num_users < 1 || streaming.requests_per_step < 1 ||
      streaming.replay_capacity < batch_size || streaming.publish_interval < 1) {
    throw ConfigError("train: streaming settings must be positive and replay_capacity >= batch_size");
  }
  effective_model_config(*this).validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"steps", c.steps},
           {"lr_embedding", c.lr_embedding},
           {"lr_hidden", c.lr_hidden},
           {"gamma", c.gamma},
           {"K", c.K},
           {"lambda", c.lambda ? json(*c.lambda) : json(nullptr)},
           {"huber_delta", c.huber_delta},
           {"tau_r", c.tau_r},
           {"sync",
            {{"mode", c.sync.mode == critic::SyncMode::hard ? "hard" : "polyak"},
             {"period", c.sync.period},
             {"tau", c.sync.tau}}},
           {"seed", c.seed},
           {"grad_clip", c.grad_clip},
           {"probe_size", c.probe_size},
           {"eval_interval", c.eval_interval},
           {"collapse_window", c.collapse_window},
           {"record_wall_ms", c.record_wall_ms},
           {"mode", c.mode},
           {"checkpoint_interval", c.checkpoint_interval},
           {"streaming",
            {{"num_users", c.streaming.num_users},
             {"requests_per_step", c.streaming.requests_per_step},
             {"replay_capacity", c.streaming.replay_capacity},
             {"epsilon", c.streaming.epsilon},
             {"publish_interval", c.streaming.publish_interval}}},
           {"ablation", c.ablation},
           {"model", c.model}};
}

void from_json(const json& j, TrainConfig& c) {
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "steps", c.steps);
  read_opt(j, "lr_embedding", c.lr_embedding);
  read_opt(j, "lr_hidden", c.lr_hidden);
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "K", c.K);
  if (auto it = j.find("lambda"); it != j.end()) {
    c.lambda = it->is_null() ? std::nullopt : std::optional<double>(it->get<double>());
  }
  read_opt(j, "huber_delta", c.huber_delta);
  read_opt(j, "tau_r", c.tau_r);
  if (auto it = j.find("sync"); it != j.end()) {
    if (auto m = it->find("mode"); m != it->end()) {
      const auto s = m->get<std::string>();
      if (s == "hard") {
        c.sync.mode = critic::SyncMode::hard;
      } else if (s == "polyak") {
        c.sync.mode = critic::SyncMode::polyak;
      } else {
        throw ConfigError("train: sync.mode must be 'hard' or 'polyak', got '" + s + "'");
      }
    }
    read_opt(*it, "period", c.sync.period);
    read_opt(*it, "tau", c.sync.tau);
  }
  read_opt(j, "seed", c.seed);
  read_opt(j, "grad_clip", c.grad_clip);
  read_opt(j, "probe_size", c.probe_size);
  read_opt(j, "eval_interval", c.eval_interval);
  read_opt(j, "collapse_window", c.collapse_window);
  read_opt(j, "record_wall_ms", c.record_wall_ms);
  read_opt(j, "mode", c.mode);
  read_opt(j, "checkpoint_interval", c.checkpoint_interval);
  if (auto it = j.find("streaming"); it != j.end()) {
    read_opt(*it, "num_users", c.streaming.num_users);
    read_opt(*it, "requests_per_step", c.streaming.requests_per_step);
    read_opt(*it, "replay_capacity", c.streaming.replay_capacity);
    read_opt(*it, "epsilon", c.streaming.epsilon);
    read_opt(*it, "publish_interval", c.streaming.publish_interval);
  }
  read_opt(j, "ablation", c.ablation);
  read_opt(j, "model", c.model);
}

ModelConfig effective_model_config(const TrainConfig& c) {
  ModelConfig m = c.model;
  m.K = c.ablation.no_mg ? 1 : c.K;
  if (c.ablation.no_ln) m.layer_norm = false;
  if (c.ablation.no_dd) {
    m.bins = critic::TimeBinSpec::single_interval();
    if (!m.towers.rpn.empty()) m.towers.rpn.back() = m.bins.width();
  }
  return m;
}

}  // namespace slmgac::trainer
