#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slmgac/diffcore/layers.hpp"
#include "slmgac/encoder/state_features.hpp"

namespace slmgac::encoder {

struct EncoderConfig {
  std::size_t table_rows = 5000;
  std::size_t embed_dim = 16;
  std::size_t user_fields = 3;  // ids per user in StateFeatures::user_static_ids
  std::size_t live_fields = 4;  // ids per candidate in StateFeatures::live_item_ids
  std::size_t attention_hidden = 32;
  std::vector<std::size_t> mlp_widths{256, 128};

  std::size_t query_dim() const { return (user_fields + live_fields) * embed_dim; }
  std::size_t state_dim() const { return query_dim() + 2 * embed_dim; }
  std::size_t output_dim() const { return mlp_widths.back(); }
  void validate() const;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

enum class GradMode { critic_path, actor_path };

using StateBatch = std::vector<const StateFeatures*>;

/// Attention pooling of one history list against the query h_a. The query is
/// projected to the item width, each item is scored by a small MLP over
/// [q, e, q*e], and the scores are normalized with a softmax across the list.
class TargetAttention {
 public:
  struct Cache {
    std::vector<std::size_t> offsets;  // batch row b owns items [offsets[b], offsets[b+1])
    diffcore::Matrix query_input;      // h_a
    diffcore::DenseCache projection;
    diffcore::Matrix items;            // all items stacked
    diffcore::Matrix q_rows;           // projected query repeated per item
    diffcore::Mlp::Cache scorer;
    Eigen::VectorXd weights;           // softmax weights per item
  };

  TargetAttention() = default;
  TargetAttention(std::size_t query_dim, std::size_t item_dim, std::size_t hidden, Rng& rng);

  /// Returns one pooled row per batch entry; rows with no items are zero.
  diffcore::Matrix forward(const diffcore::Matrix& query, const diffcore::Matrix& items,
                           const std::vector<std::size_t>& offsets, Cache* cache = nullptr) const;

  struct Grads {
    diffcore::Matrix query;
    diffcore::Matrix items;
  };
  Grads backward(const diffcore::Matrix& grad_output, const Cache& cache);

  void collect(const std::string& prefix, diffcore::ParamRefs& out);

 private:
  diffcore::Dense projection_;
  diffcore::Mlp scorer_;
};

struct EncodedState {
  diffcore::Matrix h_a;
  diffcore::Matrix h_live;
  diffcore::Matrix h_video;
  diffcore::Matrix h_s;
  diffcore::Matrix h_prime_s;
  GradMode grad_mode = GradMode::critic_path;
  std::size_t cold_start_live = 0;   // rows with an empty live history
  std::size_t cold_start_video = 0;  // rows with an empty video history
};

/// Shared state encoder: embeddings -> [v_U, v_L, h_live, h_video] -> f_MLP.
class Encoder {
 public:
  struct Cache {
    StateBatch batch;
    std::vector<std::uint64_t> static_ids;
    std::vector<std::uint64_t> live_history_ids;
    std::vector<std::uint64_t> video_history_ids;
    TargetAttention::Cache live;
    TargetAttention::Cache video;
    diffcore::Mlp::Cache mlp;
  };

  Encoder() = default;
  Encoder(const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  diffcore::Matrix embed(const std::vector<std::uint64_t>& ids) const;

  /// Forward is identical in both modes. `cache` is required for a later
  /// backward and is ignored in actor_path mode, whose backward is empty.
  EncodedState encode(const StateBatch& batch, GradMode mode, Cache* cache = nullptr) const;
  EncodedState encode(const StateFeatures& state, GradMode mode) const;

  /// Backpropagates d loss / d h'_s into every encoder parameter.
  void backward(const diffcore::Matrix& grad_h_prime, const EncodedState& encoded,
                const Cache& cache);

  void collect(const std::string& prefix, diffcore::ParamRefs& out);
  /// Embedding table only (it has its own learning rate).
  void collect_embeddings(const std::string& prefix, diffcore::ParamRefs& out);
  /// Everything except the embedding table.
  void collect_dense(const std::string& prefix, diffcore::ParamRefs& out);

  diffcore::EmbeddingTable& embeddings() { return embeddings_; }
  const diffcore::Mlp& mlp() const { return mlp_; }

 private:
  EncoderConfig config_;
  diffcore::EmbeddingTable embeddings_;
  TargetAttention live_attention_;
  TargetAttention video_attention_;
  diffcore::Mlp mlp_;
};

}  // namespace slmgac::encoder
