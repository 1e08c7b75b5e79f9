#include "slmgac/diffcore/ops.hpp"

#include <cmath>

#include "slmgac/errors.hpp"

namespace slmgac::diffcore {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      return "identity";
  }
  return "unknown";
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void activate(Matrix& m, Activation a) {
  switch (a) {
    case Activation::relu:
      m = m.cwiseMax(0.0);
      break;
    case Activation::sigmoid:
      m = m.unaryExpr([](double v) { return sigmoid(v); });
      break;
    case Activation::identity:
      break;
  }
}

void activation_backward(Matrix& grad, const Matrix& output, Activation a) {
  switch (a) {
    case Activation::relu:
      grad = (output.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::sigmoid:
      grad.array() *= output.array() * (1.0 - output.array());
      break;
    case Activation::identity:
      break;
  }
}

namespace {

void check_dense_shapes(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2 || input.cols() != weights.rows() || bias.size() != weights.cols()) {
    throw DimensionError("dense: input " + input.shape_string() + ", weights " +
                         weights.shape_string() + ", bias " + bias.shape_string() +
                         " are incompatible");
  }
}

}  // namespace

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     Activation activation) {
  check_dense_shapes(input, weights, bias);
  Matrix out = input.matrix() * weights.matrix();
  out.rowwise() += bias.matrix().row(0);
  activate(out, activation);
  return Tensor::from_matrix(out);
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& output,
                          const Tensor& grad_output, Activation activation) {
  if (output.shape() != grad_output.shape() || output.rows() != input.rows() ||
      output.cols() != weights.cols()) {
    throw DimensionError("dense_backward: output " + output.shape_string() + " vs grad " +
                         grad_output.shape_string());
  }
  Matrix g = grad_output.matrix();
  activation_backward(g, output.matrix(), activation);
  DenseGrads grads;
  grads.input = Tensor::from_matrix(g * weights.matrix().transpose());
  grads.weights = Tensor::from_matrix(input.matrix().transpose() * g);
  Matrix bias_grad = g.colwise().sum();
  grads.bias = Tensor({weights.cols()}, std::vector<double>(bias_grad.data(),
                                                          bias_grad.data() + bias_grad.size()));
  return grads;
}

Matrix layer_norm(const Matrix& input, LayerNormCache* cache, double epsilon) {
  if (input.cols() < 2) {
    throw DimensionError("layer_norm: rows need at least 2 entries, got " +
                         std::to_string(input.cols()));
  }
  const double n = static_cast<double>(input.cols());
  Matrix out(input.rows(), input.cols());
  Eigen::VectorXd inv_std(input.rows());
  for (Eigen::Index r = 0; r < input.rows(); ++r) {
    const double mean = input.row(r).sum() / n;
    auto centered = input.row(r).array() - mean;
    const double var = centered.square().sum() / n;
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    out.row(r) = centered * inv_std[r];
  }
  if (cache) {
    cache->normalized = out;
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Matrix layer_norm_backward(const Matrix& grad_output, const LayerNormCache& cache) {
  const double n = static_cast<double>(grad_output.cols());
  Matrix grad(grad_output.rows(), grad_output.cols());
  for (Eigen::Index r = 0; r < grad_output.rows(); ++r) {
    const auto g = grad_output.row(r).array();
    const auto y = cache.normalized.row(r).array();
    const double mean_g = g.sum() / n;
    const double mean_gy = (g * y).sum() / n;
    grad.row(r) = cache.inv_std[r] * (g - mean_g - y * mean_gy);
  }
  return grad;
}

Tensor layer_norm(const Tensor& input) {
  Tensor out = Tensor::from_matrix(layer_norm(Matrix(input.matrix())));
  if (input.rank() == 1) return Tensor(input.shape(), out.values());
  return out;
}

Matrix softmax(const Matrix& logits) {
  if (logits.cols() == 0) throw DimensionError("softmax: empty row");
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  Tensor out = Tensor::from_matrix(softmax(Matrix(logits.matrix())));
  if (logits.rank() == 1) return Tensor(logits.shape(), out.values());
  return out;
}

Eigen::VectorXd softmax_backward(const Eigen::VectorXd& p, const Eigen::VectorXd& grad_p) {
  const double dot = p.dot(grad_p);
  return p.array() * (grad_p.array() - dot);
}

double huber(double prediction, double target, double delta) {
  const double e = prediction - target;
  const double a = std::abs(e);
  if (a <= delta) return 0.5 * e * e;
  return delta * (a - 0.5 * delta);
}

double huber_grad(double prediction, double target, double delta) {
  const double e = prediction - target;
  if (e > delta) return delta;
  if (e < -delta) return -delta;
  return e;
}

}  // namespace slmgac::diffcore
