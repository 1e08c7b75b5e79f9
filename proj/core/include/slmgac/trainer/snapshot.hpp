#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "slmgac/actor/actor.hpp"
#include "slmgac/diffcore/tensor.hpp"
#include "slmgac/encoder/encoder.hpp"
#include "slmgac/trainer/config.hpp"

namespace slmgac::trainer {

class Model;

/// Immutable copy of the acting-side parameters.
struct PolicySnapshot {
  std::uint64_t version = 0;
  diffcore::ParamSet encoder;
  diffcore::ParamSet actor;
  std::string model_config;  // JSON of the ModelConfig the parameters belong to
  std::uint64_t config_digest = 0;
  std::uint64_t payload_digest = 0;  // over version, config digest and both parameter sets

  std::uint64_t compute_digest() const;
  bool consistent() const { return payload_digest == compute_digest(); }
};

PolicySnapshot make_snapshot(Model& model, std::uint64_t version);

void save_snapshot(const PolicySnapshot& snapshot, const std::string& path);
PolicySnapshot load_snapshot(const std::string& path);

/// Single-writer, many-reader publication point. Readers always get a whole
/// snapshot: the previous one or the new one.
class SnapshotChannel {
 public:
  /// Stamps the next version and the digest, then publishes.
  std::shared_ptr<const PolicySnapshot> publish(PolicySnapshot snapshot);
  std::shared_ptr<const PolicySnapshot> latest() const;
  std::uint64_t version() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const PolicySnapshot> current_;
  std::uint64_t next_version_ = 1;
};

/// Acting-side networks rebuilt from a snapshot.
class SnapshotPolicy {
 public:
  explicit SnapshotPolicy(const PolicySnapshot& snapshot);

  std::uint64_t version() const { return version_; }
  /// Replaces parameters when the snapshot is newer; returns true if it did.
  bool refresh(const PolicySnapshot& snapshot);

  /// p(s, 1) for each state.
  std::vector<double> inject_probabilities(const encoder::StateBatch& states,
                                           const std::vector<int>& groups) const;
  actor::PolicyOutput act(const encoder::StateFeatures& state, int group, double epsilon,
                          Rng& rng) const;

  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  std::uint64_t version_ = 0;
  encoder::Encoder encoder_;
  actor::Actor actor_;
};

}  // namespace slmgac::trainer
