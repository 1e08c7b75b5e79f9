#include <gtest/gtest.h>

#include <cmath>

#include "model_fixture.hpp"
#include "slmgac/actor/actor.hpp"
#include "slmgac/errors.hpp"

using namespace slmgac;
using actor::Actor;
using diffcore::Matrix;

TEST(ActorHead, ZeroFinalLayerGivesUniformPolicy) {
  auto rng = make_rng(31);
  Actor a(2, 12, {8, 2}, true, rng);
  for (int g = 0; g < 2; ++g) {
    auto& last = a.net.head(g).layers().back();
    last.weight.value.fill(0.0);
    last.bias.value.fill(0.0);
  }
  const Matrix h = Matrix::Random(3, 12);
  const Matrix p = a.probabilities(h, {0, 1, 1});
  EXPECT_TRUE((p.array() == 0.5).all());
  const auto out = a.policy_forward(h.row(0), 1);
  EXPECT_EQ(out.p[0], 0.5);
  EXPECT_EQ(out.propensity, 1.0);
}

TEST(ActorHead, ProbabilitiesSumToOne) {
  auto rng = make_rng(32);
  Actor a(3, 12, {8, 2}, true, rng);
  const Matrix h = Matrix::Random(20, 12) * 10;
  std::vector<int> groups(20);
  for (int i = 0; i < 20; ++i) groups[static_cast<std::size_t>(i)] = i % 3;
  const Matrix p = a.probabilities(h, groups);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(Weights, SoftmaxOverActions) {
  Matrix q(2, 2);
  q << std::log(3.0), 0.0, 0.4, 0.4;
  const auto w = actor::actor_weights(q, {0, 1}, true);
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.5, 1e-15);
  const auto raw = actor::actor_weights(q, {0, 1}, false);
  EXPECT_EQ(raw[0], std::log(3.0));
  EXPECT_EQ(raw[1], 0.4);
  Matrix p(1, 2);
  p << 0.5, 0.5;
  const auto loss = actor::actor_loss(p, {0}, {w[0]});
  EXPECT_NEAR(loss.value, 0.75 * std::log(2.0), 1e-15);
  EXPECT_NEAR(loss.value, 0.5199, 1e-4);
}

TEST(Weights, LossGradientOnLogits) {
  Matrix z = Matrix::Random(5, 2) * 2;
  const std::vector<int> actions{0, 1, 1, 0, 1};
  const std::vector<double> w{0.2, 0.9, 0.5, 0.7, 0.1};
  Matrix grad;
  actor::actor_loss(diffcore::softmax(z), actions, w, &grad);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index k = 0; k < 2; ++k) {
      const double keep = z(i, k);
      z(i, k) = keep + h;
      const double up = actor::actor_loss(diffcore::softmax(z), actions, w).value;
      z(i, k) = keep - h;
      const double down = actor::actor_loss(diffcore::softmax(z), actions, w).value;
      z(i, k) = keep;
      EXPECT_NEAR(grad(i, k), (up - down) / (2 * h), 1e-8);
    }
  }
}

TEST(Weights, ClampedSamplesAreCounted) {
  Matrix p(2, 2);
  p << 1.0, 0.0, 0.3, 0.7;
  Matrix grad;
  const auto loss = actor::actor_loss(p, {1, 1}, {1.0, 1.0}, &grad);
  EXPECT_EQ(loss.clamped, 1u);
  EXPECT_TRUE(std::isfinite(loss.value));
  EXPECT_EQ(grad.row(0).cwiseAbs().sum(), 0.0);
}

TEST(StopGradient, ActorLossLeavesCriticsAndEncoderUntouched) {
  slmgac::testing::ModelFixture fx(16);
  trainer::LossSettings settings;
  auto& model = fx.model;
  diffcore::zero_grads(model.trainable());
  trainer::accumulate_gradients(model, fx.batch, settings, {true, false, false});
  EXPECT_EQ(diffcore::grad_squared_norm(model.critic_side_params()), 0.0);
  EXPECT_EQ(diffcore::grad_squared_norm(model.encoder_params()), 0.0);
  EXPECT_GT(diffcore::grad_squared_norm(model.actor_params()), 0.0);
}

TEST(StopGradient, NoSgLetsActorTrainTheEncoder) {
  slmgac::testing::ModelFixture fx(16);
  trainer::LossSettings settings;
  settings.flags.no_sg = true;
  auto& model = fx.model;
  diffcore::zero_grads(model.trainable());
  trainer::accumulate_gradients(model, fx.batch, settings, {true, false, false});
  EXPECT_GT(diffcore::grad_squared_norm(model.embedding_params()), 0.0);
}

TEST(Exploration, ZeroEpsilonIsGreedy) {
  auto rng = make_rng(34);
  actor::PolicyOutput p;
  p.p = {0.3, 0.7};
  for (int i = 0; i < 100; ++i) {
    const auto out = actor::select_action(p, 0.0, rng);
    EXPECT_EQ(out.chosen_action, 1);
    EXPECT_EQ(out.propensity, 1.0);
  }
}

TEST(Exploration, FullEpsilonIsUniform) {
  auto rng = make_rng(35);
  actor::PolicyOutput p;
  p.p = {0.9, 0.1};
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    const auto out = actor::select_action(p, 1.0, rng);
    ones += out.chosen_action;
    EXPECT_EQ(out.propensity, 0.5);
  }
  const double sigma = std::sqrt(n * 0.25);
  EXPECT_LE(std::abs(ones - n / 2.0), 3 * sigma);
}

TEST(Exploration, PartialEpsilonPropensities) {
  EXPECT_NEAR(actor::epsilon_greedy_probability({0.1, 0.9}, 0.2, 1), 0.9, 1e-15);
  EXPECT_NEAR(actor::epsilon_greedy_probability({0.1, 0.9}, 0.2, 0), 0.1, 1e-15);
  auto rng = make_rng(36);
  actor::PolicyOutput p;
  p.p = {0.1, 0.9};
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += actor::select_action(p, 0.2, rng).chosen_action;
  EXPECT_LE(std::abs(ones - 0.9 * n), 3 * std::sqrt(n * 0.09));
  EXPECT_THROW(actor::select_action(p, 1.5, rng), ConfigError);
}
