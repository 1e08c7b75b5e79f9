#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "slmgac/diffcore/adam.hpp"
#include "slmgac/feedsim/log.hpp"
#include "slmgac/trainer/config.hpp"
#include "slmgac/trainer/model.hpp"
#include "slmgac/trainer/snapshot.hpp"

namespace slmgac::trainer {

struct MetricsRow {
  std::int64_t step = 0;
  double l_actor = 0.0;
  double l_critic = 0.0;
  double l_sl = 0.0;
  double mean_q = 0.0;
  double max_q = 0.0;
  double alloc_ratio = 0.0;
  double wall_ms = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "step,L_actor,L_critic,L_SL,mean_Q,max_Q,alloc_ratio,wall_ms";

std::string metrics_line(const MetricsRow& row);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

/// Flags a run once the greedy allocation ratio has sat at exactly 0 or 1
/// for `window` consecutive probe evaluations.
class CollapseDetector {
 public:
  explicit CollapseDetector(int window = 50) : window_(window) {}
  void observe(std::int64_t step, double alloc_ratio);
  bool flagged() const { return flagged_step_ >= 0; }
  std::int64_t flagged_step() const { return flagged_step_; }

 private:
  int window_;
  int run_ = 0;
  double pinned_value_ = -1.0;
  std::int64_t flagged_step_ = -1;
};

struct TrainOptions {
  std::string out_dir;  // empty: nothing is written
  const feedsim::LoggedDataset* probe = nullptr;  // offline: probe states; default samples the log
  SnapshotChannel* channel = nullptr;             // publication target
  int publish_interval = 0;                       // offline: updates between publishes, 0 = never
};

struct TrainResult {
  Model model;
  std::vector<MetricsRow> metrics;
  bool collapsed = false;
  std::int64_t collapse_step = -1;
  std::string label_kind;  // "clipped_double_q" or "vanilla_expectation"
  std::int64_t steps = 0;
  std::size_t clamped = 0;
  double lambda = 0.0;
  std::uint64_t last_published_version = 0;
  std::size_t transitions_seen = 0;
};

/// Offline training over a logged dataset.
TrainResult train(const feedsim::LoggedDataset& data, const TrainConfig& config,
                  const TrainOptions& options = {});

/// Streaming training: an epsilon-greedy acting copy of the latest snapshot
/// serves simulator requests into a bounded replay; the trainer samples from
/// the replay and publishes snapshots back.
TrainResult train_streaming(const feedsim::SimConfig& sim, const TrainConfig& config,
                            const TrainOptions& options = {});

std::shared_ptr<const PolicySnapshot> publish_snapshot(Model& model, SnapshotChannel& channel);

/// Standard deviation across evaluations of the probe mean Q.
double q_std(const std::vector<MetricsRow>& metrics);

/// Rescales gradients so their global L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_gradients(const diffcore::ParamRefs& params, double max_norm);

}  // namespace slmgac::trainer
