// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#include "fepcross/numcore/tensor.hpp"

#include <gtest/gtest.h>

namespace nc = fepcross::numcore;

TEST(Tensor, SizeMatchesShapeProduct) {
  nc::TensorF t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_FLOAT_EQ(t.at({1, 2, 3}), 1.5f);
}

TEST(Tensor, RejectsDataOfWrongLength) {
  EXPECT_THROW(nc::TensorF({2, 2}, std::vector<float>{1, 2, 3}), nc::ShapeError);
}

TEST(Tensor, RowMajorIndexing) {
  nc::TensorD t({2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at({1, 0}), 3.0);
  EXPECT_EQ(t.at({0, 2}), 2.0);
  EXPECT_THROW(t.at({2, 0}), std::out_of_range);
}

TEST(Tensor, ReshapeKeepsBuffer) {
  nc::TensorD t({2, 3}, std::vector<double>{0, 1, 2, 3, 4, 5});
  auto r = t.reshaped({3, 2});
  EXPECT_EQ(r.vec(), t.vec());
  EXPECT_THROW(t.reshaped({4, 2}), nc::ShapeError);
}

TEST(Tensor, CastRoundTrip) {
  nc::TensorD t({3}, std::vector<double>{0.5, -1.25, 2.0});
  EXPECT_EQ(t.cast<float>().cast<double>(), t);
}
