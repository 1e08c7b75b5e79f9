#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace slmgac::diffcore {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Dense row-major f64 tensor. Rank 1 tensors behave as a single row when
/// viewed as a matrix.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor from_matrix(const Matrix& m);
  static Tensor vector(std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  std::size_t size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  Eigen::Map<Matrix> matrix();
  Eigen::Map<const Matrix> matrix() const;

  void fill(double v);
  bool all_finite() const;
  double squared_norm() const;
  std::string shape_string() const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// A trainable tensor with its gradient accumulator (same shape).
struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Non-owning view over the parameters of a network, keyed by path.
using ParamRefs = std::vector<std::pair<std::string, Parameter*>>;

void zero_grads(const ParamRefs& params);
double grad_squared_norm(const ParamRefs& params);

/// Owning, deep-copied set of named parameters. Used for checkpoints,
/// policy snapshots and target networks.
class ParamSet {
 public:
  ParamSet() = default;

  static ParamSet capture(const ParamRefs& refs);
  /// Copies values (not gradients) back into live parameters. Every path in
  /// `refs` must exist here with the same shape.
  void restore(const ParamRefs& refs) const;

  void insert(const std::string& path, Parameter p);
  bool contains(const std::string& path) const { return entries_.count(path) != 0; }
  const Parameter& at(const std::string& path) const;
  Parameter& at(const std::string& path);
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, Parameter>& entries() const { return entries_; }

  ParamRefs refs();

  /// Bit-exact binary encoding of (path, shape, values) triples.
  std::string to_bytes() const;
  static ParamSet from_bytes(const std::string& bytes);
  void save(const std::string& file) const;
  static ParamSet load(const std::string& file);

  /// FNV-1a over paths, shapes and raw value bits.
  std::uint64_t digest() const;

  bool operator==(const ParamSet& other) const;

 private:
  std::map<std::string, Parameter> entries_;
};

}  // namespace slmgac::diffcore
