#include "slmgac/encoder/encoder.hpp"

#include "slmgac/errors.hpp"

namespace slmgac::encoder {

using diffcore::Activation;
using diffcore::Matrix;

void EncoderConfig::validate() const {
  if (table_rows == 0 || embed_dim == 0 || attention_hidden == 0) {
    throw ConfigError("encoder: table_rows, embed_dim and attention_hidden must be positive");
  }
  if (user_fields + live_fields == 0) throw ConfigError("encoder: no static fields");
  if (mlp_widths.empty()) throw ConfigError("encoder: mlp_widths is empty");
  for (auto w : mlp_widths) {
    if (w == 0) throw ConfigError("encoder: zero width in mlp_widths");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"table_rows", c.table_rows},   {"embed_dim", c.embed_dim},
                     {"user_fields", c.user_fields}, {"live_fields", c.live_fields},
                     {"attention_hidden", c.attention_hidden}, {"mlp_widths", c.mlp_widths}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  if (j.contains("table_rows")) j.at("table_rows").get_to(c.table_rows);
  if (j.contains("embed_dim")) j.at("embed_dim").get_to(c.embed_dim);
  if (j.contains("user_fields")) j.at("user_fields").get_to(c.user_fields);
  if (j.contains("live_fields")) j.at("live_fields").get_to(c.live_fields);
  if (j.contains("attention_hidden")) j.at("attention_hidden").get_to(c.attention_hidden);
  if (j.contains("mlp_widths")) j.at("mlp_widths").get_to(c.mlp_widths);
}

TargetAttention::TargetAttention(std::size_t query_dim, std::size_t item_dim, std::size_t hidden,
                                 Rng& rng)
    : projection_(query_dim, item_dim, Activation::identity, rng) {
  const std::size_t widths[] = {hidden, 1};
  scorer_ = diffcore::Mlp(3 * item_dim, widths, Activation::relu, Activation::identity, rng);
}

Matrix TargetAttention::forward(const Matrix& query, const Matrix& items,
                                const std::vector<std::size_t>& offsets, Cache* cache) const {
  const auto batch = query.rows();
  const auto d = static_cast<Eigen::Index>(projection_.out_dim());
  if (offsets.size() != static_cast<std::size_t>(batch) + 1 ||
      offsets.back() != static_cast<std::size_t>(items.rows())) {
    throw DimensionError("target_attention: offsets do not match the item matrix");
  }
  if (items.rows() > 0 && items.cols() != d) {
    throw DimensionError("target_attention: item width " + std::to_string(items.cols()) +
                         " vs projected query width " + std::to_string(d));
  }

  diffcore::DenseCache proj_cache;
  const Matrix q = projection_.forward(query, cache ? &proj_cache : nullptr);
  const auto n = items.rows();
  Matrix q_rows(n, d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (auto i = offsets[b]; i < offsets[b + 1]; ++i) q_rows.row(i) = q.row(b);
  }

  Eigen::VectorXd weights = Eigen::VectorXd::Zero(n);
  Matrix out = Matrix::Zero(batch, d);
  diffcore::Mlp::Cache scorer_cache;
  if (n > 0) {
    Matrix x(n, 3 * d);
    x.leftCols(d) = q_rows;
    x.middleCols(d, d) = items;
    x.rightCols(d) = q_rows.cwiseProduct(items);
    const Matrix scores = scorer_.forward(x, cache ? &scorer_cache : nullptr);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto begin = static_cast<Eigen::Index>(offsets[b]);
      const auto len = static_cast<Eigen::Index>(offsets[b + 1]) - begin;
      if (len == 0) continue;
      const auto s = scores.col(0).segment(begin, len);
      auto w = weights.segment(begin, len);
      w = (s.array() - s.maxCoeff()).exp();
      w /= w.sum();
      out.row(b) = w.transpose() * items.middleRows(begin, len);
    }
  }

  if (cache) {
    cache->offsets = offsets;
    cache->query_input = query;
    cache->projection = std::move(proj_cache);
    cache->items = items;
    cache->q_rows = std::move(q_rows);
    cache->scorer = std::move(scorer_cache);
    cache->weights = std::move(weights);
  }
  return out;
}

TargetAttention::Grads TargetAttention::backward(const Matrix& grad_output, const Cache& cache) {
  const auto batch = grad_output.rows();
  const auto d = grad_output.cols();
  const auto n = cache.items.rows();
  Grads g;
  g.items = Matrix::Zero(n, d);
  Matrix grad_q = Matrix::Zero(batch, d);

  if (n > 0) {
    Matrix grad_scores(n, 1);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto begin = static_cast<Eigen::Index>(cache.offsets[b]);
      const auto len = static_cast<Eigen::Index>(cache.offsets[b + 1]) - begin;
      if (len == 0) continue;
      const auto w = cache.weights.segment(begin, len);
      const auto e = cache.items.middleRows(begin, len);
      const Eigen::VectorXd grad_w = e * grad_output.row(b).transpose();
      g.items.middleRows(begin, len) = w * grad_output.row(b);
      grad_scores.col(0).segment(begin, len) = diffcore::softmax_backward(w, grad_w);
    }
    const Matrix grad_x = scorer_.backward(grad_scores, cache.scorer);
    const Matrix grad_prod = grad_x.rightCols(d);
    const Matrix grad_q_rows = grad_x.leftCols(d) + grad_prod.cwiseProduct(cache.items);
    g.items += grad_x.middleCols(d, d) + grad_prod.cwiseProduct(cache.q_rows);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (auto i = cache.offsets[b]; i < cache.offsets[b + 1]; ++i) {
        grad_q.row(b) += grad_q_rows.row(i);
      }
    }
  }
  g.query = projection_.backward(grad_q, cache.projection);
  return g;
}

void TargetAttention::collect(const std::string& prefix, diffcore::ParamRefs& out) {
  projection_.collect(prefix + "/query", out);
  scorer_.collect(prefix + "/score", out);
}

Encoder::Encoder(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  embeddings_ = diffcore::EmbeddingTable(config_.table_rows, config_.embed_dim, rng);
  live_attention_ =
      TargetAttention(config_.query_dim(), config_.embed_dim, config_.attention_hidden, rng);
  video_attention_ =
      TargetAttention(config_.query_dim(), config_.embed_dim, config_.attention_hidden, rng);
  mlp_ = diffcore::Mlp(config_.state_dim(), config_.mlp_widths, Activation::relu,
                       Activation::relu, rng);
}

Matrix Encoder::embed(const std::vector<std::uint64_t>& ids) const {
  return embeddings_.lookup(ids);
}

EncodedState Encoder::encode(const StateBatch& batch, GradMode mode, Cache* cache) const {
  const auto rows = static_cast<Eigen::Index>(batch.size());
  const std::size_t fields = config_.user_fields + config_.live_fields;
  const auto d = static_cast<Eigen::Index>(config_.embed_dim);

  std::vector<std::uint64_t> static_ids;
  std::vector<std::uint64_t> live_ids;
  std::vector<std::uint64_t> video_ids;
  std::vector<std::size_t> live_offsets{0};
  std::vector<std::size_t> video_offsets{0};
  static_ids.reserve(batch.size() * fields);
  for (const StateFeatures* s : batch) {
    if (s->user_static_ids.size() != config_.user_fields ||
        s->live_item_ids.size() != config_.live_fields) {
      throw DimensionError("encoder: expected " + std::to_string(config_.user_fields) +
                           " user ids and " + std::to_string(config_.live_fields) +
                           " live ids, got " + std::to_string(s->user_static_ids.size()) +
                           " and " + std::to_string(s->live_item_ids.size()));
    }
    if (s->live_history_ids.size() > kMaxHistory || s->video_history_ids.size() > kMaxHistory) {
      throw DimensionError("encoder: history longer than " + std::to_string(kMaxHistory));
    }
    static_ids.insert(static_ids.end(), s->user_static_ids.begin(), s->user_static_ids.end());
    static_ids.insert(static_ids.end(), s->live_item_ids.begin(), s->live_item_ids.end());
    live_ids.insert(live_ids.end(), s->live_history_ids.begin(), s->live_history_ids.end());
    video_ids.insert(video_ids.end(), s->video_history_ids.begin(), s->video_history_ids.end());
    live_offsets.push_back(live_ids.size());
    video_offsets.push_back(video_ids.size());
  }

  const bool keep = cache != nullptr && mode == GradMode::critic_path;
  EncodedState out;
  out.grad_mode = mode;
  const Matrix rows_static = embeddings_.lookup(static_ids);
  out.h_a = Eigen::Map<const Matrix>(rows_static.data(), rows, static_cast<Eigen::Index>(fields) * d);
  out.h_live = live_attention_.forward(out.h_a, embeddings_.lookup(live_ids), live_offsets,
                                       keep ? &cache->live : nullptr);
  out.h_video = video_attention_.forward(out.h_a, embeddings_.lookup(video_ids), video_offsets,
                                         keep ? &cache->video : nullptr);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.cold_start_live += live_offsets[b] == live_offsets[b + 1];
    out.cold_start_video += video_offsets[b] == video_offsets[b + 1];
  }
  out.h_s.resize(rows, static_cast<Eigen::Index>(config_.state_dim()));
  out.h_s << out.h_a, out.h_live, out.h_video;
  out.h_prime_s = mlp_.forward(out.h_s, keep ? &cache->mlp : nullptr);

  if (keep) {
    cache->batch = batch;
    cache->static_ids = std::move(static_ids);
    cache->live_history_ids = std::move(live_ids);
    cache->video_history_ids = std::move(video_ids);
  }
  return out;
}

EncodedState Encoder::encode(const StateFeatures& state, GradMode mode) const {
  return encode(StateBatch{&state}, mode, nullptr);
}

void Encoder::backward(const Matrix& grad_h_prime, const EncodedState& encoded,
                       const Cache& cache) {
  if (encoded.grad_mode == GradMode::actor_path) return;
  if (grad_h_prime.rows() != encoded.h_prime_s.rows() ||
      grad_h_prime.cols() != encoded.h_prime_s.cols()) {
    throw DimensionError("encoder backward: gradient shape does not match h'_s");
  }
  const auto qd = static_cast<Eigen::Index>(config_.query_dim());
  const auto d = static_cast<Eigen::Index>(config_.embed_dim);

  const Matrix grad_h_s = mlp_.backward(grad_h_prime, cache.mlp);
  Matrix grad_h_a = grad_h_s.leftCols(qd);
  const auto live = live_attention_.backward(grad_h_s.middleCols(qd, d), cache.live);
  const auto video = video_attention_.backward(grad_h_s.rightCols(d), cache.video);
  grad_h_a += live.query + video.query;

  embeddings_.backward(cache.live_history_ids, live.items);
  embeddings_.backward(cache.video_history_ids, video.items);
  const Eigen::Map<const Matrix> grad_static(
      grad_h_a.data(), static_cast<Eigen::Index>(cache.static_ids.size()), d);
  embeddings_.backward(cache.static_ids, grad_static);
}

void Encoder::collect(const std::string& prefix, diffcore::ParamRefs& out) {
  collect_embeddings(prefix, out);
  collect_dense(prefix, out);
}

void Encoder::collect_embeddings(const std::string& prefix, diffcore::ParamRefs& out) {
  embeddings_.collect(prefix + "/embedding", out);
}

void Encoder::collect_dense(const std::string& prefix, diffcore::ParamRefs& out) {
  live_attention_.collect(prefix + "/attn_live", out);
  video_attention_.collect(prefix + "/attn_video", out);
  mlp_.collect(prefix + "/mlp", out);
}

}  // namespace slmgac::encoder
