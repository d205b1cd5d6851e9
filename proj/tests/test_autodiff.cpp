// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fnndg/fnndg.hpp"
#include "support/oracle.hpp"

namespace fnndg {
namespace {

using testing::max_relative_error;
using testing::numeric_gradient;
using testing::random_matrix;

constexpr double kGradTol = 1e-4;

using Unary = std::function<Tensor(const Tensor&)>;

// Weighted sum of op(x) so every output entry gets a distinct upstream gradient.
double weighted_value(const Unary& op, const Matrix& x, const Matrix& weights) {
  const Tensor y = op(Tensor::constant(x));
  return sum(multiply(y, Tensor::constant(weights))).item();
}

double check_unary(const Unary& op, const Matrix& x, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor probe = op(Tensor::constant(x));
  const Matrix weights = random_matrix(probe.rows(), probe.cols(), rng);

  Tape tape;
  const Tensor px = tape.watch(Tensor::parameter(x));
  const Tensor root = sum(multiply(op(px), Tensor::constant(weights)));
  const Matrix analytic = tape.backward(root).of(px);
  const Matrix numeric =
      numeric_gradient([&](const Matrix& m) { return weighted_value(op, m, weights); }, x);
  return max_relative_error(analytic, numeric);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor b = Tensor::constant(Matrix::from_rows({{3, 4}, {5, 6}}));
  EXPECT_EQ(matmul(Tensor::constant(Matrix::identity(2)), b).value(), b.value());
}

TEST(Matmul, RowTimesColumn) {
  const Tensor out = matmul(Tensor::constant(Matrix::from_rows({{1, 2}})),
                            Tensor::constant(Matrix::from_rows({{3}, {4}})));
  EXPECT_DOUBLE_EQ(out.item(), 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  const Tensor a = Tensor::constant(Matrix(2, 3));
  const Tensor b = Tensor::constant(Matrix(2, 3));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  Rng rng(11);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 2, rng);

  Tape tape;
  const Tensor ta = tape.watch(Tensor::parameter(a));
  const Tensor tb = tape.watch(Tensor::parameter(b));
  const Gradients g = tape.backward(sum(matmul(ta, tb)));

  const auto f_a = [&](const Matrix& m) {
    return sum(matmul(Tensor::constant(m), Tensor::constant(b))).item();
  };
  const auto f_b = [&](const Matrix& m) {
    return sum(matmul(Tensor::constant(a), Tensor::constant(m))).item();
  };
  EXPECT_LT(max_relative_error(g.of(ta), numeric_gradient(f_a, a)), 1e-5);
  EXPECT_LT(max_relative_error(g.of(tb), numeric_gradient(f_b, b)), 1e-5);
}

TEST(AddBias, BroadcastsOverRows) {
  const Tensor out = add_bias(Tensor::constant(Matrix(2, 2)), Tensor::constant(Matrix::from_rows({{1, 2}})));
  EXPECT_EQ(out.value(), Matrix::from_rows({{1, 2}, {1, 2}}));
  const Tensor same = add_bias(Tensor::constant(Matrix::from_rows({{1, 1}})),
                               Tensor::constant(Matrix::from_rows({{0, 0}})));
  EXPECT_EQ(same.value(), Matrix::from_rows({{1, 1}}));
}

TEST(AddBias, ColumnMismatchThrows) {
  EXPECT_THROW(add_bias(Tensor::constant(Matrix(2, 3)), Tensor::constant(Matrix(1, 2))), ShapeError);
  EXPECT_THROW(add_bias(Tensor::constant(Matrix(2, 3)), Tensor::constant(Matrix(2, 3))), ShapeError);
}

TEST(AddBias, GradientsMatchFiniteDifferences) {
  Rng rng(12);
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix b = random_matrix(1, 3, rng);
  const Matrix w = random_matrix(4, 3, rng);

  Tape tape;
  const Tensor tx = tape.watch(Tensor::parameter(x));
  const Tensor tb = tape.watch(Tensor::parameter(b));
  const Gradients g = tape.backward(sum(multiply(add_bias(tx, tb), Tensor::constant(w))));

  const auto f_b = [&](const Matrix& m) {
    return sum(multiply(add_bias(Tensor::constant(x), Tensor::constant(m)), Tensor::constant(w))).item();
  };
  EXPECT_LT(max_relative_error(g.of(tb), numeric_gradient(f_b, b)), kGradTol);
  EXPECT_LT(check_unary([&](const Tensor& t) { return add_bias(t, Tensor::constant(b)); }, x, 3),
            kGradTol);
}

TEST(Relu, SignCasesAndIdempotence) {
  EXPECT_EQ(relu(Tensor::constant(Matrix::from_rows({{-1, 0, 2}}))).value(),
            Matrix::from_rows({{0, 0, 2}}));
  Rng rng(5);
  const Tensor x = Tensor::constant(random_matrix(5, 5, rng));
  EXPECT_EQ(relu(relu(x)).value(), relu(x).value());
}

TEST(Relu, SubgradientAtZeroIsZero) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(Matrix::from_rows({{0.0, 1.0}})));
  EXPECT_EQ(tape.backward(sum(relu(x))).of(x), Matrix::from_rows({{0.0, 1.0}}));
}

TEST(Relu, GradientAwayFromKink) {
  Rng rng(6);
  Matrix x = random_matrix(4, 5, rng);
  for (double& v : x.data) {
    if (std::abs(v) < 1e-3) v = 0.5;
  }
  EXPECT_LT(check_unary(relu, x, 7), kGradTol);
}

TEST(RowNorm, PythagoreanRow) {
  EXPECT_DOUBLE_EQ(row_l2_norm(Tensor::constant(Matrix::from_rows({{3, 4}}))).item(), 5.0);
}

TEST(RowNorm, ZeroRowHasZeroNormAndGradient) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(Matrix::from_rows({{0, 0, 0}, {1, 2, 2}})));
  const Tensor norms = row_l2_norm(x);
  EXPECT_EQ(norms.value(), Matrix::from_rows({{0}, {3}}));
  const Matrix g = tape.backward(sum(norms)).of(x);
  EXPECT_EQ(g.row(0)[0], 0.0);
  EXPECT_EQ(g.row(0)[1], 0.0);
  EXPECT_EQ(g.row(0)[2], 0.0);
  EXPECT_TRUE(std::isfinite(g(1, 0)));
}

TEST(RowNorm, GradientOnRowsAwayFromOrigin) {
  Rng rng(8);
  Matrix x = random_matrix(5, 4, rng);
  for (std::size_t r = 0; r < x.rows; ++r) x(r, 0) += 1.0;  // norm well above 0.1
  EXPECT_LT(check_unary(row_l2_norm, x, 9), kGradTol);
}

TEST(Softmax, HandComputedRows) {
  const Tensor p = softmax_rows(Tensor::constant(
      Matrix::from_rows({{0.0, std::log(3.0)}, {1000.0, 1000.0}})));
  EXPECT_NEAR(p(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.75, 1e-15);
  EXPECT_EQ(p(1, 0), 0.5);
  EXPECT_EQ(p(1, 1), 0.5);

  const Tensor eq = softmax_rows(Tensor::constant(Matrix(1, 4, 2.5)));
  for (double v : eq.value().data) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, RowsAreDistributions) {
  Rng rng(10);
  const Tensor p = softmax_rows(Tensor::constant(random_matrix(50, 7, rng, -30, 30)));
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.value().row(r)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  EXPECT_LT(check_unary(softmax_rows, random_matrix(4, 5, rng, -2, 2), 14), kGradTol);
}

TEST(Detach, ProductWithDetachedSelf) {
  const Matrix v = Matrix::from_rows({{1.5, -2.0, 3.0}});
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(v));
  const Matrix g = tape.backward(sum(multiply(x, detach(x)))).of(x);
  EXPECT_EQ(g, v);
}

TEST(Detach, IdentityOnConstants) {
  const Tensor c = Tensor::constant(Matrix::from_rows({{1, 2}, {3, 4}}));
  const Tensor d = detach(c);
  EXPECT_EQ(d.value(), c.value());
  EXPECT_FALSE(d.node_id().has_value());
}

TEST(Detach, BlockedPathGivesZeroGradient) {
  Rng rng(15);
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(random_matrix(3, 3, rng)));
  const Matrix g = tape.backward(sum(square(detach(x)))).of(x);
  EXPECT_EQ(g, Matrix(3, 3));
}

TEST(Backward, SumGivesOnes) {
  Rng rng(16);
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(random_matrix(2, 6, rng)));
  EXPECT_EQ(tape.backward(sum(x)).of(x), Matrix(2, 6, 1.0));
}

TEST(Backward, MeanOfSquares) {
  Rng rng(17);
  const Matrix v = random_matrix(3, 4, rng);
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(v));
  const Matrix g = tape.backward(mean(square(x))).of(x);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(g.data[i], 2.0 * v.data[i] / 12.0, 1e-15);
}

TEST(Backward, NonScalarRootIsContractError) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(Matrix(2, 2, 1.0)));
  EXPECT_THROW(tape.backward(square(x)), ContractError);
}

TEST(Backward, UnreachedNodesStayZero) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(Matrix(1, 3, 2.0)));
  const Tensor y = tape.watch(Tensor::parameter(Matrix(1, 3, 5.0)));
  const Tensor unused = square(y);
  const Gradients g = tape.backward(sum(x));
  EXPECT_EQ(g.of(y), Matrix(1, 3));
  EXPECT_EQ(g.of(unused), Matrix(1, 3));
}

TEST(Backward, SharedInputAccumulates) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(Matrix::from_rows({{2.0}})));
  // x*x + 3x -> 2x + 3 = 7
  const Tensor root = add(multiply(x, x), scale(x, 3.0));
  EXPECT_DOUBLE_EQ(tape.backward(root).of(x)(0, 0), 7.0);
}

TEST(Backward, MixingTapesIsContractError) {
  Tape t1;
  Tape t2;
  const Tensor a = t1.watch(Tensor::parameter(Matrix(1, 1, 1.0)));
  const Tensor b = t2.watch(Tensor::parameter(Matrix(1, 1, 1.0)));
  EXPECT_THROW(add(a, b), ContractError);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  Rng rng(18);
  const Matrix x = random_matrix(3, 4, rng, 0.2, 2.0);
  const Matrix other = random_matrix(3, 4, rng);
  const Tensor c = Tensor::constant(other);

  EXPECT_LT(check_unary([&](const Tensor& t) { return subtract(t, c); }, x, 1), kGradTol);
  EXPECT_LT(check_unary([&](const Tensor& t) { return subtract(c, t); }, x, 2), kGradTol);
  EXPECT_LT(check_unary([&](const Tensor& t) { return multiply(t, c); }, x, 3), kGradTol);
  EXPECT_LT(check_unary([&](const Tensor& t) { return add(t, c); }, x, 4), kGradTol);
  EXPECT_LT(check_unary([](const Tensor& t) { return scale(t, -1.7); }, x, 5), kGradTol);
  EXPECT_LT(check_unary([](const Tensor& t) { return add_scalar(t, 0.3); }, x, 6), kGradTol);
  EXPECT_LT(check_unary(square, x, 7), kGradTol);
  EXPECT_LT(check_unary(clamped_log, x, 8), kGradTol);
  EXPECT_LT(check_unary(mean, x, 9), kGradTol);
  EXPECT_LT(check_unary(mean_rows, x, 10), kGradTol);
  EXPECT_LT(check_unary(sum, x, 11), kGradTol);
}

TEST(ClampedLog, ClampsAndBlocksGradientBelowFloor) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::parameter(Matrix::from_rows({{0.0, 1e-20, 1.0}})));
  const Tensor y = clamped_log(x);
  EXPECT_DOUBLE_EQ(y(0, 0), std::log(kLogClamp));
  EXPECT_DOUBLE_EQ(y(0, 1), std::log(kLogClamp));
  EXPECT_EQ(y(0, 2), 0.0);
  const Matrix g = tape.backward(sum(y)).of(x);
  EXPECT_EQ(g(0, 0), 0.0);
  EXPECT_EQ(g(0, 1), 0.0);
  EXPECT_EQ(g(0, 2), 1.0);
}

TEST(Backward, DeterministicAcrossRuns) {
  const auto run = [] {
    Rng rng(19);
    Tape tape;
    const Tensor x = tape.watch(Tensor::parameter(random_matrix(6, 5, rng)));
    const Tensor w = tape.watch(Tensor::parameter(random_matrix(5, 3, rng)));
    const Tensor root = mean(row_l2_norm(softmax_rows(matmul(x, w))));
    const Gradients g = tape.backward(root);
    return std::make_pair(g.of(x), g.of(w));
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace fnndg
