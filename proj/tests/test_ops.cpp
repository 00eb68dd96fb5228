#include <gtest/gtest.h>

#include <cmath>

#include "kdseq/ops.hpp"
#include "kdseq/rng.hpp"
#include "support.hpp"

using namespace kdseq;
using kdseq::testing::check_gradients;
using kdseq::testing::random_tensor;

namespace {

void expect_values(const Tensor& t, std::vector<double> expected, double tol = 1e-12) {
  ASSERT_EQ(t.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t[i], expected[i], tol) << "index " << i;
}

void expect_gradients_match(const std::function<Tensor()>& build, std::vector<Tensor*> leaves) {
  const auto checks = check_gradients(build, leaves);
  for (std::size_t i = 0; i < checks.size(); ++i) {
    EXPECT_LT(checks[i].norm_rel_error(), 1e-4) << "leaf " << i;
    EXPECT_LT(checks[i].max_abs_error(), 1e-6) << "leaf " << i;
  }
}

}  // namespace

TEST(Tensor, FromChecksSize) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(shape_size(t.shape()), 6u);
}

TEST(Tensor, CloneIsIndependent) {
  Tensor a = Tensor::from({2}, {1, 2});
  Tensor b = a.clone();
  b.mutable_values()[0] = 7;
  EXPECT_EQ(a[0], 1);
}

TEST(Matmul, Examples) {
  const Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  expect_values(matmul(Tensor::from({2, 2}, {1, 0, 0, 1}), m), {1, 2, 3, 4});
  expect_values(matmul(m, Tensor::zeros({2, 2})), {0, 0, 0, 0});
  expect_values(matmul(m, Tensor::from({2, 2}, {5, 6, 7, 8})), {19, 22, 43, 50});
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
}

TEST(Bmm, MatchesPerBatchMatmul) {
  Rng rng(3);
  const Tensor a = random_tensor({3, 2, 4}, rng);
  const Tensor b = random_tensor({3, 4, 5}, rng);
  const Tensor c = bmm(a, b);
  ASSERT_EQ(c.shape(), (Shape{3, 2, 5}));
  for (std::size_t k = 0; k < 3; ++k) {
    const Tensor ak = reshape(slice(a, 0, k, k + 1), {2, 4});
    const Tensor bk = reshape(slice(b, 0, k, k + 1), {4, 5});
    const Tensor ck = matmul(ak, bk);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(c[k * 10 + i], ck[i], 1e-12);
  }
}

TEST(Softmax, Examples) {
  expect_values(softmax(Tensor::from({3}, {0, 0, 0}), 0), {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const double c = 0.37;
  expect_values(softmax(Tensor::from({2}, {c, c + std::log(2.0)}), 0), {1.0 / 3, 2.0 / 3});
  const Tensor big = softmax(Tensor::from({2}, {1000, 0}), 0);
  EXPECT_NEAR(big[0], 1.0, 1e-12);
  EXPECT_NEAR(big[1], 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(big[0]) && std::isfinite(big[1]));
}

TEST(Softmax, RowsSumToOneAlongAxis) {
  Rng rng(5);
  const Tensor s = softmax(random_tensor({3, 4}, rng, -5, 5), 1);
  for (std::size_t r = 0; r < 3; ++r) {
    double z = 0;
    for (std::size_t k = 0; k < 4; ++k) z += s[r * 4 + k];
    EXPECT_NEAR(z, 1.0, 1e-12);
  }
}

TEST(LogSoftmax, FiniteWhereSoftmaxUnderflows) {
  const Tensor l = log_softmax(Tensor::from({2}, {1000, 0}), 0);
  EXPECT_NEAR(l[0], 0.0, 1e-12);
  EXPECT_NEAR(l[1], -1000.0, 1e-9);
}

TEST(CrossEntropy, Examples) {
  std::vector<double> onehot(50, 0.0);
  onehot[7] = 1.0;
  const Tensor uniform = log_softmax(Tensor::zeros({50}), 0);
  EXPECT_NEAR(cross_entropy(Tensor::from({50}, onehot), uniform).item(), std::log(50.0), 1e-12);

  const Tensor half = Tensor::from({2}, {0.5, 0.5});
  const Tensor log_half = Tensor::from({2}, {std::log(0.5), std::log(0.5)});
  EXPECT_NEAR(cross_entropy(half, log_half).item(), std::log(2.0), 1e-12);
  EXPECT_NEAR(cross_entropy(Tensor::from({2}, {0.9, 0.1}), log_half).item(), std::log(2.0), 1e-12);
}

TEST(CrossEntropy, RejectsUnnormalizedTarget) {
  EXPECT_THROW(cross_entropy(Tensor::from({2}, {0.5, 0.6}), Tensor::from({2}, {-1, -1})), ValidationError);
}

TEST(Backward, QuadraticAndConstant) {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(mul(x, x)));
  }
  const auto g = x.grad();
  EXPECT_EQ(g, (std::vector<double>{2, 4, 6}));

  Tensor y = Tensor::from({2}, {4, 5}, true);
  Tensor unused = Tensor::from({2}, {1, 1}, true);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(scale(y, 0.0)));
  }
  EXPECT_EQ(y.grad(), (std::vector<double>{0, 0}));
  EXPECT_EQ(unused.grad(), (std::vector<double>{0, 0}));
}

TEST(Backward, NonScalarLossIsAnError) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  TapeScope scope(tape);
  const Tensor y = mul(x, x);
  EXPECT_ANY_THROW(tape.backward(y));
}

TEST(Backward, NoRecordingWithoutTape) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  const Tensor y = sum(mul(x, x));
  EXPECT_EQ(y.item(), 5.0);
  EXPECT_FALSE(x.has_grad());
}

// Finite-difference oracle on each primitive, composed to a scalar through
// a fixed random projection so that every output entry matters.
class OpGradient : public ::testing::Test {
 protected:
  Rng rng{11};
  Tensor project(const Tensor& y) {
    if (!weights_.defined() || weights_.shape() != y.shape()) weights_ = random_tensor(y.shape(), rng);
    return sum(mul(y, weights_));
  }

 private:
  Tensor weights_;
};

TEST_F(OpGradient, Matmul) {
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  expect_gradients_match([&] { return project(matmul(a, b)); }, {&a, &b});
}

TEST_F(OpGradient, Bmm) {
  Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({2, 4, 2}, rng);
  expect_gradients_match([&] { return project(bmm(a, b)); }, {&a, &b});
}

TEST_F(OpGradient, Elementwise) {
  Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
  expect_gradients_match([&] { return project(add(a, b)); }, {&a, &b});
  expect_gradients_match([&] { return project(sub(a, b)); }, {&a, &b});
  expect_gradients_match([&] { return project(mul(a, b)); }, {&a, &b});
  expect_gradients_match([&] { return project(scale(a, -2.5)); }, {&a});
  expect_gradients_match([&] { return project(sigmoid(a)); }, {&a});
  expect_gradients_match([&] { return project(tanh(a)); }, {&a});
}

TEST_F(OpGradient, Log) {
  Tensor a = random_tensor({5}, rng, 0.5, 2.0);
  expect_gradients_match([&] { return project(log(a)); }, {&a});
}

TEST_F(OpGradient, AddRow) {
  Tensor x = random_tensor({3, 4}, rng), b = random_tensor({1, 4}, rng);
  expect_gradients_match([&] { return project(add_row(x, b)); }, {&x, &b});
}

TEST_F(OpGradient, SoftmaxAndLogSoftmax) {
  Tensor x = random_tensor({3, 4}, rng, -2, 2);
  expect_gradients_match([&] { return project(softmax(x, 1)); }, {&x});
  expect_gradients_match([&] { return project(softmax(x, 0)); }, {&x});
  expect_gradients_match([&] { return project(log_softmax(x, 1)); }, {&x});
}

TEST_F(OpGradient, ConcatSliceReshape) {
  Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 2}, rng);
  expect_gradients_match(
      [&] {
        const Tensor parts[] = {a, b};
        return project(concat(parts, 1));
      },
      {&a, &b});
  Tensor c = random_tensor({4, 3}, rng);
  expect_gradients_match([&] { return project(slice(c, 0, 1, 3)); }, {&c});
  expect_gradients_match([&] { return project(reshape(c, {3, 4})); }, {&c});
}

TEST_F(OpGradient, GatherAccumulatesRepeatedRows) {
  Tensor table = random_tensor({5, 3}, rng);
  const std::vector<TokenId> ids{1, 4, 1, 0};
  expect_gradients_match([&] { return project(gather(table, ids)); }, {&table});
}

TEST_F(OpGradient, MeanAndCrossEntropy) {
  Tensor x = random_tensor({2, 5}, rng, -2, 2);
  const Tensor target = softmax(random_tensor({2, 5}, rng, -2, 2), 1);
  expect_gradients_match([&] { return mean(mul(x, x)); }, {&x});
  expect_gradients_match([&] { return cross_entropy(target, log_softmax(x, 1)); }, {&x});
}

TEST_F(OpGradient, CompositeLstmLikeCell) {
  Tensor x = random_tensor({2, 3}, rng), w = random_tensor({3, 8}, rng), h = random_tensor({2, 2}, rng),
         u = random_tensor({2, 8}, rng), bias = random_tensor({1, 8}, rng);
  expect_gradients_match(
      [&] {
        const Tensor z = add_row(add(matmul(x, w), matmul(h, u)), bias);
        const Tensor i = sigmoid(slice(z, 1, 0, 2));
        const Tensor g = tanh(slice(z, 1, 2, 4));
        const Tensor o = sigmoid(slice(z, 1, 4, 6));
        return project(mul(o, tanh(mul(i, g))));
      },
      {&x, &w, &h, &u, &bias});
}
