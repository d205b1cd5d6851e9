// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fnndg/fnndg.hpp"
#include "support/oracle.hpp"

namespace fnndg {
namespace {

using testing::random_matrix;

NetworkSpec small_spec() { return NetworkSpec{2, {8}, 4, 3}; }

ModelParams zeroed(const ModelParams& params) {
  ModelParams out = params;
  for (Tensor* p : mutable_parameters(out)) {
    *p = Tensor::parameter(Matrix(p->rows(), p->cols()));
  }
  return out;
}

TEST(InitParams, ShapesChain) {
  const ModelParams p = init_params(small_spec(), 1);
  ASSERT_EQ(p.layers.size(), 3u);
  const std::size_t shapes[3][2] = {{2, 8}, {8, 4}, {4, 3}};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p.layers[i].weight.rows(), shapes[i][0]);
    EXPECT_EQ(p.layers[i].weight.cols(), shapes[i][1]);
    EXPECT_EQ(p.layers[i].bias.rows(), 1u);
    EXPECT_EQ(p.layers[i].bias.cols(), shapes[i][1]);
  }
  EXPECT_EQ(p.feature_layers().size(), 2u);
}

TEST(InitParams, DeterministicPerSeed) {
  const auto a = parameters(init_params(small_spec(), 1));
  const auto b = parameters(init_params(small_spec(), 1));
  const auto c = parameters(init_params(small_spec(), 2));
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].value(), b[i].value());
    any_diff = any_diff || !(a[i].value() == c[i].value());
  }
  EXPECT_TRUE(any_diff);
}

TEST(InitParams, BoundsAndZeroBiases) {
  const NetworkSpec spec{6, {10, 7}, 5, 4};
  const ModelParams p = init_params(spec, 3);
  for (const Layer& l : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    for (double v : l.weight.value().data) {
      EXPECT_LE(std::abs(v), bound);
    }
    for (double v : l.bias.value().data) EXPECT_EQ(v, 0.0);
  }
}

TEST(InitParams, InvalidSpecThrows) {
  EXPECT_THROW(init_params(NetworkSpec{0, {}, 4, 3}, 1), ConfigError);
  EXPECT_THROW(init_params(NetworkSpec{2, {0}, 4, 3}, 1), ConfigError);
  EXPECT_THROW(init_params(NetworkSpec{2, {}, 0, 3}, 1), ConfigError);
}

TEST(Parameters, CountOrderAndGradFlag) {
  const ModelParams p = init_params(small_spec(), 4);
  const auto first = parameters(p);
  const auto second = parameters(p);
  ASSERT_EQ(first.size(), 6u);
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_TRUE(first[i].requires_grad());
    EXPECT_EQ(first[i].shared_value(), second[i].shared_value());
  }
}

TEST(Forward, ZeroNetworkGivesZeroFeaturesAndUniformSoftmax) {
  const ModelParams p = zeroed(init_params(small_spec(), 5));
  Rng rng(1);
  const Tensor x = Tensor::constant(random_matrix(7, 2, rng));
  const Tensor f = forward_features(p, x);
  EXPECT_EQ(f.value(), Matrix(7, 4));
  const Tensor probs = softmax_rows(forward_logits(p, f));
  for (double v : probs.value().data) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Forward, IdentityEmbeddedLinearFeatures) {
  ModelParams p = init_params(NetworkSpec{3, {}, 5, 2}, 6);
  Matrix w(3, 5);
  for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
  p.layers[0].weight = Tensor::parameter(w);
  p.layers[0].bias = Tensor::parameter(Matrix(1, 5));
  const Matrix x = Matrix::from_rows({{1, -2, 3}, {0.5, 0, -7}});
  const Matrix f = forward_features(p, Tensor::constant(x)).value();
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(f(r, c), x(r, c));
    EXPECT_EQ(f(r, 3), 0.0);
    EXPECT_EQ(f(r, 4), 0.0);
  }
}

TEST(Forward, DoublingLinearWeightsDoublesNorms) {
  ModelParams p = init_params(NetworkSpec{4, {}, 6, 3}, 7);
  Rng rng(2);
  const Tensor x = Tensor::constant(random_matrix(10, 4, rng));
  const Matrix before = row_l2_norm(forward_features(p, x)).value();
  p.layers[0].weight = Tensor::parameter(scale(p.layers[0].weight, 2.0).value());
  const Matrix after = row_l2_norm(forward_features(p, x)).value();
  for (std::size_t r = 0; r < before.rows; ++r) EXPECT_NEAR(after(r, 0), 2.0 * before(r, 0), 1e-12);
}

TEST(Forward, DoublingDeepWeightsGrowsNorms) {
  ModelParams p = init_params(NetworkSpec{4, {9}, 6, 3}, 8);
  Rng rng(3);
  const Tensor x = Tensor::constant(random_matrix(10, 4, rng));
  const double before = mean(row_l2_norm(forward_features(p, x))).item();
  for (std::size_t i = 0; i < 2; ++i) {
    p.layers[i].weight = Tensor::parameter(scale(p.layers[i].weight, 2.0).value());
  }
  EXPECT_GT(mean(row_l2_norm(forward_features(p, x))).item(), before);
}

TEST(Forward, SingleClassHead) {
  const ModelParams p = init_params(NetworkSpec{3, {}, 4, 1}, 9);
  Rng rng(4);
  const Tensor logits = forward_logits(p, forward_features(p, Tensor::constant(random_matrix(5, 3, rng))));
  EXPECT_EQ(logits.cols(), 1u);
  EXPECT_EQ(logits.rows(), 5u);
}

TEST(Forward, ShapeMismatchThrows) {
  const ModelParams p = init_params(small_spec(), 10);
  EXPECT_THROW(forward_features(p, Tensor::constant(Matrix(3, 5))), ShapeError);
  EXPECT_THROW(forward_logits(p, Tensor::constant(Matrix(3, 5))), ShapeError);
}

TEST(Forward, MatchesPlainReference) {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const NetworkSpec spec{5, {7, 3}, 6, 4};
    const ModelParams p = init_params(spec, seed);
    const Matrix x = random_matrix(8, 5, rng, -3, 3);
    const Tensor f = forward_features(p, Tensor::constant(x));
    const Tensor z = forward_logits(p, f);
    EXPECT_LT(testing::max_abs_difference(f.value(), testing::reference_features(p, x)), 1e-12);
    EXPECT_LT(testing::max_abs_difference(z.value(),
                                          testing::reference_logits(p, testing::reference_features(p, x))),
              1e-12);
  }
}

TEST(Forward, BitwiseDeterministic) {
  const ModelParams p = init_params(small_spec(), 11);
  Rng rng(6);
  const Matrix x = random_matrix(9, 2, rng);
  const Matrix a = forward_logits(p, forward_features(p, Tensor::constant(x))).value();
  const Matrix b = forward_logits(p, forward_features(p, Tensor::constant(x))).value();
  EXPECT_EQ(a, b);
}

TEST(Forward, CrossEntropyGradientEndToEnd) {
  Rng rng(7);
  const ModelParams p = init_params(NetworkSpec{3, {5}, 4, 3}, 12);
  const Matrix x = random_matrix(6, 3, rng);
  const std::vector<int> labels{0, 1, 2, 2, 1, 0};
  const auto analytic = testing::analytic_parameter_gradients(p, [&](const ModelParams& live) {
    return cross_entropy(forward_logits(live, forward_features(live, Tensor::constant(x))), labels);
  });
  const auto numeric = testing::numeric_parameter_gradients(p, [&](const ModelParams& q) {
    return testing::reference_cross_entropy(
        testing::reference_logits(q, testing::reference_features(q, x)), labels);
  });
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    EXPECT_LT(testing::max_relative_error(analytic[i], numeric[i]), 1e-4) << "parameter " << i;
  }
}

TEST(Checkpoint, RoundTripsBitwise) {
  const ModelParams p = init_params(NetworkSpec{4, {6}, 5, 3}, 13);
  std::stringstream buf;
  write_checkpoint(buf, p);
  const ModelParams q = read_checkpoint(buf);
  EXPECT_EQ(q.spec, p.spec);
  EXPECT_EQ(q.init_seed, p.init_seed);
  const auto a = parameters(p);
  const auto b = parameters(q);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value(), b[i].value());
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream empty;
  EXPECT_THROW(read_checkpoint(empty), IoError);

  const ModelParams p = init_params(NetworkSpec{2, {}, 3, 2}, 14);
  std::stringstream buf;
  write_checkpoint(buf, p);
  std::string text = buf.str();
  text.resize(text.size() / 2);
  std::stringstream truncated(text);
  EXPECT_THROW(read_checkpoint(truncated), IoError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.ckpt"), IoError);
}

}  // namespace
}  // namespace fnndg
