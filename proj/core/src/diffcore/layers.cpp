#include "slmgac/diffcore/layers.hpp"

#include <cmath>

#include "slmgac/errors.hpp"

namespace slmgac::diffcore {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t({fan_in, fan_out});
  for (double& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return t;
}

Dense::Dense(std::size_t in, std::size_t out, Activation act, Rng& rng)
    : weight(glorot_uniform(in, out, rng)), bias(Tensor({out})), activation(act) {}

Matrix Dense::forward(const Matrix& input, DenseCache* cache) const {
  if (static_cast<std::size_t>(input.cols()) != in_dim()) {
    throw DimensionError("dense: input [" + std::to_string(input.rows()) + "," +
                         std::to_string(input.cols()) + "] vs weights " +
                         weight.value.shape_string());
  }
  Matrix out = input * weight.value.matrix();
  out.rowwise() += bias.value.matrix().row(0);
  activate(out, activation);
  if (cache) {
    cache->input = input;
    cache->output = out;
  }
  return out;
}

Matrix Dense::backward(const Matrix& grad_output, const DenseCache& cache) {
  Matrix g = grad_output;
  activation_backward(g, cache.output, activation);
  weight.grad.matrix().noalias() += cache.input.transpose() * g;
  bias.grad.matrix().row(0) += g.colwise().sum();
  return g * weight.value.matrix().transpose();
}

void Dense::collect(const std::string& prefix, ParamRefs& out) {
  out.emplace_back(prefix + "/w", &weight);
  out.emplace_back(prefix + "/b", &bias);
}

Mlp::Mlp(std::size_t in, std::span<const std::size_t> widths, Activation hidden, Activation final,
         Rng& rng) {
  if (widths.empty()) throw ConfigError("mlp: at least one layer width required");
  std::size_t prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (widths[i] == 0) throw ConfigError("mlp: zero layer width");
    layers_.emplace_back(prev, widths[i], i + 1 == widths.size() ? final : hidden, rng);
    prev = widths[i];
  }
}

Matrix Mlp::forward(const Matrix& input, Cache* cache) const {
  if (cache) cache->layers.resize(layers_.size());
  Matrix x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x, cache ? &cache->layers[i] : nullptr);
  }
  return x;
}

Matrix Mlp::backward(const Matrix& grad_output, const Cache& cache) {
  Matrix g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i].backward(g, cache.layers[i]);
  }
  return g;
}

void Mlp::collect(const std::string& prefix, ParamRefs& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect(prefix + "/" + std::to_string(i), out);
  }
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w;
  for (const auto& l : layers_) w.push_back(l.out_dim());
  return w;
}

EmbeddingTable::EmbeddingTable(std::size_t rows, std::size_t dim, Rng& rng)
    : table(Tensor({rows, dim})) {
  // Each row is the weight vector of a one-hot input: fan_in 1, fan_out dim.
  const double limit = std::sqrt(6.0 / static_cast<double>(1 + dim));
  for (double& v : table.value.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

std::size_t EmbeddingTable::row_of(std::uint64_t id) const {
  std::uint64_t h = id * 0x9E3779B97F4A7C15ull;
  h ^= h >> 29;
  return static_cast<std::size_t>(h % static_cast<std::uint64_t>(rows()));
}

Matrix EmbeddingTable::lookup(std::span<const std::uint64_t> ids) const {
  Matrix out(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim()));
  const auto t = table.value.matrix();
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(i) = t.row(row_of(ids[i]));
  return out;
}

void EmbeddingTable::backward(std::span<const std::uint64_t> ids, const Matrix& grad_rows) {
  auto g = table.grad.matrix();
  for (std::size_t i = 0; i < ids.size(); ++i) g.row(row_of(ids[i])) += grad_rows.row(i);
}

void EmbeddingTable::collect(const std::string& prefix, ParamRefs& out) {
  out.emplace_back(prefix + "/table", &table);
}

}  // namespace slmgac::diffcore
