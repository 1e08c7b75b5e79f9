#pragma once

#include <string_view>

#include "slmgac/diffcore/tensor.hpp"

namespace slmgac::diffcore {

enum class Activation { relu, sigmoid, identity };

std::string_view to_string(Activation a);

double sigmoid(double x);

// ---------------------------------------------------------------------------
// Dense layer: output = activation(input * weights + bias)
// ---------------------------------------------------------------------------

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     Activation activation);

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

/// Exact gradients of sum(grad_output ⊙ dense_forward(...)). `output` is the
/// forward result, needed for the sigmoid derivative.
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& output,
                          const Tensor& grad_output, Activation activation);

/// Applies the activation in place.
void activate(Matrix& m, Activation a);
/// grad_pre = grad_out ⊙ activation'(.), written in place into grad.
void activation_backward(Matrix& grad, const Matrix& output, Activation a);

// ---------------------------------------------------------------------------
// Layer normalization without learned gain or bias.
// ---------------------------------------------------------------------------

inline constexpr double kLayerNormEpsilon = 1e-14;

struct LayerNormCache {
  Matrix normalized;
  Eigen::VectorXd inv_std;
};

Matrix layer_norm(const Matrix& input, LayerNormCache* cache = nullptr,
                  double epsilon = kLayerNormEpsilon);
Matrix layer_norm_backward(const Matrix& grad_output, const LayerNormCache& cache);
Tensor layer_norm(const Tensor& input);

// ---------------------------------------------------------------------------
// Row-wise softmax with max subtraction.
// ---------------------------------------------------------------------------

Matrix softmax(const Matrix& logits);
Tensor softmax(const Tensor& logits);
/// Jacobian-vector product for a single softmax row p.
Eigen::VectorXd softmax_backward(const Eigen::VectorXd& p, const Eigen::VectorXd& grad_p);

// ---------------------------------------------------------------------------
// Huber loss of e = prediction - target.
// ---------------------------------------------------------------------------

double huber(double prediction, double target, double delta);
/// d huber / d prediction, clipped to [-delta, delta].
double huber_grad(double prediction, double target, double delta);

}  // namespace slmgac::diffcore
