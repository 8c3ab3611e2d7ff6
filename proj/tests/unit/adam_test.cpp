// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/numcore/adam.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace nc = fepcross::numcore;

namespace {

nc::AdamState<double> state_with(double lr, double wd = 0.0) {
  nc::AdamState<double> s;
  s.options.learning_rate = lr;
  s.options.weight_decay = wd;
  return s;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  auto x = nc::parameter(nc::TensorD::scalar(1.0));
  x.mutable_grad()[0] = 1.0;
  auto state = state_with(1e-3);
  std::vector<nc::Var<double>> params = {x};
  nc::adam_step<double>(params, state);
  EXPECT_NEAR(x.value()[0], 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8), 1e-12);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  auto x = nc::parameter(nc::TensorD({3}, std::vector<double>{0.5, -2.0, 3.0}));
  const auto before = x.value();
  auto state = state_with(1e-2);
  std::vector<nc::Var<double>> params = {x};
  for (int i = 0; i < 3; ++i) nc::adam_step<double>(params, state);
  EXPECT_EQ(x.value(), before);
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, DecreasesQuadratic) {
  auto x = nc::parameter(nc::TensorD::scalar(1.0));
  auto state = state_with(0.1);
  std::vector<nc::Var<double>> params = {x};
  double prev = 1.0;
  for (int i = 0; i < 5; ++i) {
    x.zero_grad();
    nc::backward(nc::mul(x, x));
    nc::adam_step<double>(params, state);
    const double f = x.value()[0] * x.value()[0];
    EXPECT_LT(f, prev);
    prev = f;
  }
}

TEST(Adam, MatchesHandWrittenUpdateRule) {
  // Reference recursion on a scalar with weight decay.
  const double lr = 0.05, wd = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double p = 2.0, m = 0, v = 0;
  auto x = nc::parameter(nc::TensorD::scalar(2.0));
  auto state = state_with(lr, wd);
  std::vector<nc::Var<double>> params = {x};
  for (int t = 1; t <= 10; ++t) {
    const double g = 3.0 * p - 1.0;
    x.mutable_grad()[0] = 3.0 * x.value()[0] - 1.0;
    nc::adam_step<double>(params, state);
    p -= lr * wd * p;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    p -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    EXPECT_NEAR(x.value()[0], p, 1e-12);
  }
}

TEST(Adam, WeightDecayIsDecoupled) {
  auto x = nc::parameter(nc::TensorD::scalar(1.0));
  auto state = state_with(0.1, 0.5);
  std::vector<nc::Var<double>> params = {x};
  nc::adam_step<double>(params, state);
  // With zero gradient only the decay term acts.
  EXPECT_NEAR(x.value()[0], 1.0 - 0.1 * 0.5, 1e-15);
}

TEST(Adam, RejectsMisalignedGradients) {
  nc::TensorD p({3});
  nc::TensorD g({2});
  std::vector<nc::TensorD*> ps = {&p};
  std::vector<const nc::TensorD*> gs = {&g};
  auto state = state_with(0.1);
  EXPECT_THROW(nc::adam_step<double>(ps, gs, state), nc::ShapeError);
}
