#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "slmgac/diffcore/adam.hpp"
#include "slmgac/diffcore/grad_check.hpp"
#include "slmgac/diffcore/layers.hpp"
#include "slmgac/diffcore/ops.hpp"
#include "slmgac/errors.hpp"
#include "slmgac/random.hpp"

namespace dc = slmgac::diffcore;
using dc::Matrix;
using dc::Tensor;

TEST(Dense, IdentityWeightsPassInputThrough) {
  const Tensor x({1, 2}, {1.0, 0.0});
  const Tensor w({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const Tensor b({2}, {0.0, 0.0});
  const Tensor y = dc::dense_forward(x, w, b, dc::Activation::identity);
  EXPECT_EQ(y.values(), (std::vector<double>{1.0, 0.0}));
}

TEST(Dense, ReluClampsNegatives) {
  const Tensor x({1, 2}, {1.0, -2.0});
  const Tensor w({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const Tensor b({2}, {0.0, 0.0});
  const Tensor y = dc::dense_forward(x, w, b, dc::Activation::relu);
  EXPECT_EQ(y.values(), (std::vector<double>{1.0, 0.0}));
}

TEST(Dense, BackwardMatchesFiniteDifferences) {
  auto rng = slmgac::make_rng(3);
  dc::Dense layer(3, 4, dc::Activation::sigmoid, rng);
  Matrix x = Matrix::Random(5, 3);
  Matrix c = Matrix::Random(5, 4);
  dc::ParamRefs params;
  layer.collect("dense", params);
  auto loss = [&] { return (layer.forward(x).array() * c.array()).sum(); };
  auto backprop = [&] {
    dc::DenseCache cache;
    layer.forward(x, &cache);
    layer.backward(c, cache);
  };
  dc::GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto report = dc::grad_check(params, loss, backprop, opt);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(Dense, FreeFunctionBackwardMatchesLayer) {
  const Tensor x({2, 3}, {0.1, -0.4, 0.3, 0.7, 0.2, -0.5});
  const Tensor w({3, 2}, {0.5, -0.2, 0.1, 0.3, -0.7, 0.4});
  const Tensor b({2}, {0.05, -0.1});
  const Tensor y = dc::dense_forward(x, w, b, dc::Activation::sigmoid);
  const Tensor gy({2, 2}, {1.0, 0.5, -0.3, 2.0});
  const auto g = dc::dense_backward(x, w, y, gy, dc::Activation::sigmoid);
  const double h = 1e-6;
  for (std::size_t i = 0; i < w.size(); ++i) {
    Tensor wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    const auto f = [&](const Tensor& ww) {
      const Tensor o = dc::dense_forward(x, ww, b, dc::Activation::sigmoid);
      return (o.matrix().array() * gy.matrix().array()).sum();
    };
    EXPECT_NEAR(g.weights[i], (f(wp) - f(wm)) / (2 * h), 1e-8);
  }
}

TEST(LayerNorm, StandardizesRow) {
  const Tensor y = dc::layer_norm(Tensor({1, 3}, {1.0, 2.0, 3.0}));
  EXPECT_NEAR(y[0], -1.22474, 1e-4);
  EXPECT_NEAR(y[1], 0.0, 1e-4);
  EXPECT_NEAR(y[2], 1.22474, 1e-4);
}

TEST(LayerNorm, ConstantRowMapsToZeros) {
  const Tensor y = dc::layer_norm(Tensor({1, 4}, {5.0, 5.0, 5.0, 5.0}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, ShiftInvariantExactly) {
  auto rng = slmgac::make_rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x(3, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = static_cast<double>(static_cast<int>(rng() % 201) - 100);
    }
    const double c = static_cast<double>(static_cast<int>(rng() % 2001) - 1000);
    const Matrix shifted = (x.array() + c).matrix();
    EXPECT_TRUE(dc::layer_norm(x) == dc::layer_norm(shifted));
  }
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  Matrix x = Matrix::Random(4, 6);
  const Matrix c = Matrix::Random(4, 6);
  dc::LayerNormCache cache;
  dc::layer_norm(x, &cache);
  const Matrix g = dc::layer_norm_backward(c, cache);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    const double num = ((dc::layer_norm(xp) - dc::layer_norm(xm)).array() * c.array()).sum() / (2 * h);
    EXPECT_NEAR(g.data()[i], num, 1e-7);
  }
}

TEST(Softmax, SymmetricLogits) {
  const Tensor p = dc::softmax(Tensor({1, 2}, {0.0, 0.0}));
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], 0.5);
}

TEST(Softmax, ThreeToOne) {
  const Tensor p = dc::softmax(Tensor({1, 2}, {std::log(3.0), 0.0}));
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(Softmax, ShiftInvariant) {
  auto rng = slmgac::make_rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix x = Matrix::Random(2, 5) * 10.0;
    const double c = (slmgac::uniform01(rng) - 0.5) * 200.0;
    const Matrix d = dc::softmax(x) - dc::softmax((x.array() + c).matrix());
    EXPECT_LE(d.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Huber, QuadraticBranch) { EXPECT_DOUBLE_EQ(dc::huber(0.5, 0.0, 1.0), 0.125); }

TEST(Huber, LinearBranch) { EXPECT_DOUBLE_EQ(dc::huber(2.0, 0.0, 1.0), 1.5); }

TEST(Huber, MinimumAtZeroError) {
  EXPECT_EQ(dc::huber(0.3, 0.3, 1.0), 0.0);
  EXPECT_EQ(dc::huber_grad(0.3, 0.3, 1.0), 0.0);
}

TEST(Huber, GradientClippedToDelta) {
  EXPECT_DOUBLE_EQ(dc::huber_grad(5.0, 0.0, 0.7), 0.7);
  EXPECT_DOUBLE_EQ(dc::huber_grad(-5.0, 0.0, 0.7), -0.7);
  EXPECT_DOUBLE_EQ(dc::huber_grad(0.2, 0.0, 0.7), 0.2);
}

TEST(Huber, ValueAndSlopeContinuousAtDelta) {
  for (double delta : {0.3, 1.0, 4.0}) {
    for (double sign : {-1.0, 1.0}) {
      const double e = sign * delta;
      const double h = 1e-10;
      EXPECT_NEAR(dc::huber(e - h, 0.0, delta), dc::huber(e + h, 0.0, delta), 1e-9);
      EXPECT_NEAR(dc::huber_grad(e - h, 0.0, delta), dc::huber_grad(e + h, 0.0, delta), 1e-9);
    }
  }
}

namespace {

dc::Parameter scalar(double v) { return dc::Parameter(Tensor({1}, {v})); }

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  dc::Parameter w = scalar(1.0);
  dc::AdamState state;
  state.config.learning_rate = 0.1;
  w.grad[0] = 2.0 * w.value[0];
  dc::adam_step({{"w", &w}}, state);
  EXPECT_NEAR(w.value[0], 0.9, 1e-6);
  EXPECT_EQ(w.grad[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesParameterAndDecaysMoments) {
  dc::Parameter w = scalar(1.0);
  dc::AdamState state;
  dc::adam_step({{"w", &w}}, state);
  EXPECT_EQ(w.value[0], 1.0);
  EXPECT_EQ(state.moments.at("w").first[0], 0.0);

  w.grad[0] = 1.0;
  dc::adam_step({{"w", &w}}, state);
  const double m = state.moments.at("w").first[0];
  const double v = state.moments.at("w").second[0];
  dc::adam_step({{"w", &w}}, state);
  EXPECT_DOUBLE_EQ(state.moments.at("w").first[0], 0.9 * m);
  EXPECT_DOUBLE_EQ(state.moments.at("w").second[0], 0.999 * v);
}

TEST(Adam, ThreeStepTraceOnQuadratic) {
  // w <- w - lr m_hat / (sqrt(v_hat) + eps) on loss w^2 from w = 1, lr = 0.1,
  // evaluated by hand from the recurrences.
  const double expected[3] = {0.9000000005, 0.8004122286917928, 0.7015862729460303};
  dc::Parameter w = scalar(1.0);
  dc::AdamState state;
  state.config.learning_rate = 0.1;
  for (double e : expected) {
    w.grad[0] = 2.0 * w.value[0];
    dc::adam_step({{"w", &w}}, state);
    EXPECT_NEAR(w.value[0], e, 1e-12);
  }
}

TEST(Adam, SameInputsGiveSameStep) {
  auto run = [] {
    dc::Parameter w(Tensor({3}, {0.5, -1.0, 2.0}));
    dc::AdamState state;
    for (int k = 0; k < 5; ++k) {
      for (int i = 0; i < 3; ++i) w.grad[i] = std::sin(1.0 + i + k) * w.value[i];
      dc::adam_step({{"w", &w}}, state);
    }
    return w.value;
  };
  const Tensor a = run(), b = run();
  for (int i = 0; i < 3; ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Adam, NonFiniteGradientIsRejectedWithoutSideEffects) {
  dc::Parameter a = scalar(1.0), b = scalar(2.0);
  a.grad[0] = 1.0;
  b.grad[0] = std::nan("");
  dc::AdamState state;
  EXPECT_THROW(dc::adam_step({{"a", &a}, {"b", &b}}, state), slmgac::NumericFault);
  EXPECT_EQ(a.value[0], 1.0);
  EXPECT_EQ(state.step, 0);
}

TEST(GradCheck, SigmoidLayerPasses) {
  auto rng = slmgac::make_rng(8);
  dc::Dense layer(4, 3, dc::Activation::sigmoid, rng);
  const Matrix x = Matrix::Random(6, 4);
  dc::ParamRefs params;
  layer.collect("d", params);
  auto loss = [&] { return layer.forward(x).sum(); };
  auto backprop = [&] {
    dc::DenseCache cache;
    const Matrix y = layer.forward(x, &cache);
    layer.backward(Matrix::Ones(y.rows(), y.cols()), cache);
  };
  const auto report = dc::grad_check(params, loss, backprop);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(GradCheck, CorruptedGradientFails) {
  auto rng = slmgac::make_rng(8);
  dc::Dense layer(4, 3, dc::Activation::sigmoid, rng);
  const Matrix x = Matrix::Random(6, 4);
  dc::ParamRefs params;
  layer.collect("d", params);
  auto loss = [&] { return layer.forward(x).sum(); };
  auto backprop = [&] {
    dc::DenseCache cache;
    const Matrix y = layer.forward(x, &cache);
    layer.backward(Matrix::Ones(y.rows(), y.cols()), cache);
    for (auto& [path, p] : params) {
      for (double& g : p->grad.values()) g *= 2.0;
    }
  };
  const auto report = dc::grad_check(params, loss, backprop);
  EXPECT_FALSE(report.passed());
}

TEST(Embedding, SameIdGivesSameRow) {
  auto rng = slmgac::make_rng(1);
  dc::EmbeddingTable table(100, 4, rng);
  const std::vector<std::uint64_t> ids{42, 42};
  const Matrix rows = table.lookup(ids);
  EXPECT_TRUE(rows.row(0) == rows.row(1));
}

TEST(Embedding, GradientTouchesOnlyHashedRow) {
  auto rng = slmgac::make_rng(1);
  dc::EmbeddingTable table(100, 4, rng);
  const std::vector<std::uint64_t> ids{12345};
  table.backward(ids, Matrix::Ones(1, 4));
  const std::size_t hit = table.row_of(12345);
  const auto g = table.table.grad.matrix();
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    if (static_cast<std::size_t>(r) == hit) {
      EXPECT_EQ(g.row(r).sum(), 4.0);
    } else {
      EXPECT_EQ(g.row(r).cwiseAbs().sum(), 0.0);
    }
  }
}

TEST(Embedding, EmptyIdsGiveZeroRows) {
  auto rng = slmgac::make_rng(1);
  dc::EmbeddingTable table(100, 4, rng);
  const Matrix rows = table.lookup(std::vector<std::uint64_t>{});
  EXPECT_EQ(rows.rows(), 0);
  EXPECT_EQ(rows.cols(), 4);
}

TEST(ParamSet, BytesAndFileRoundTripAreExact) {
  auto rng = slmgac::make_rng(2);
  dc::Mlp mlp(5, std::vector<std::size_t>{7, 3}, dc::Activation::relu, dc::Activation::identity, rng);
  dc::ParamRefs refs;
  mlp.collect("mlp", refs);
  const auto set = dc::ParamSet::capture(refs);
  EXPECT_TRUE(dc::ParamSet::from_bytes(set.to_bytes()) == set);
  const auto path = (std::filesystem::temp_directory_path() / "slmgac_paramset_test.params").string();
  set.save(path);
  const auto loaded = dc::ParamSet::load(path);
  EXPECT_TRUE(loaded == set);
  EXPECT_EQ(loaded.digest(), set.digest());
  std::filesystem::remove(path);
}

TEST(ParamSet, RestoreRejectsShapeMismatch) {
  auto rng = slmgac::make_rng(2);
  dc::Dense a(3, 2, dc::Activation::identity, rng), b(3, 4, dc::Activation::identity, rng);
  dc::ParamRefs ra, rb;
  a.collect("d", ra);
  b.collect("d", rb);
  EXPECT_THROW(dc::ParamSet::capture(ra).restore(rb), slmgac::Error);
}

TEST(ParamSet, TruncatedBytesAreRejected) {
  auto rng = slmgac::make_rng(2);
  dc::Dense a(3, 2, dc::Activation::identity, rng);
  dc::ParamRefs ra;
  a.collect("d", ra);
  const auto bytes = dc::ParamSet::capture(ra).to_bytes();
  EXPECT_THROW(dc::ParamSet::from_bytes(bytes.substr(0, bytes.size() / 2)), slmgac::Error);
}
