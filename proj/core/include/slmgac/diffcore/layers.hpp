#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "slmgac/diffcore/ops.hpp"
#include "slmgac/diffcore/tensor.hpp"
#include "slmgac/random.hpp"

namespace slmgac::diffcore {

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

struct DenseCache {
  Matrix input;
  Matrix output;
};

class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, Activation activation, Rng& rng);

  Matrix forward(const Matrix& input, DenseCache* cache = nullptr) const;
  /// Accumulates parameter gradients and returns d loss / d input.
  Matrix backward(const Matrix& grad_output, const DenseCache& cache);

  void collect(const std::string& prefix, ParamRefs& out);

  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }

  Parameter weight;
  Parameter bias;
  Activation activation = Activation::identity;
};

/// Stack of dense layers: hidden layers use `hidden`, the last uses `final`.
class Mlp {
 public:
  struct Cache {
    std::vector<DenseCache> layers;
  };

  Mlp() = default;
  Mlp(std::size_t in, std::span<const std::size_t> widths, Activation hidden, Activation final,
      Rng& rng);

  Matrix forward(const Matrix& input, Cache* cache = nullptr) const;
  Matrix backward(const Matrix& grad_output, const Cache& cache);

  void collect(const std::string& prefix, ParamRefs& out);

  std::size_t in_dim() const { return layers_.front().in_dim(); }
  std::size_t out_dim() const { return layers_.back().out_dim(); }
  std::vector<std::size_t> widths() const;
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

 private:
  std::vector<Dense> layers_;
};

/// Hashed embedding table. Ids are mapped into [0, rows) with a 64-bit
/// multiplicative hash; collisions are accepted.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim, Rng& rng);

  std::size_t row_of(std::uint64_t id) const;
  /// One row per id, in order. An empty id list gives a 0 x dim matrix.
  Matrix lookup(std::span<const std::uint64_t> ids) const;
  /// Adds grad_rows(i) into the gradient of row_of(ids[i]).
  void backward(std::span<const std::uint64_t> ids, const Matrix& grad_rows);

  void collect(const std::string& prefix, ParamRefs& out);

  std::size_t rows() const { return table.value.rows(); }
  std::size_t dim() const { return table.value.cols(); }

  Parameter table;
};

}  // namespace slmgac::diffcore
