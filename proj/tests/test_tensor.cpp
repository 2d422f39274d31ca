// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "tensor.hpp"
#include "test_util.hpp"

namespace ernetcl {
namespace {

using testing::random_tensor;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an ernetcl::Error";
  return ErrorCode::kInvalidArgument;
}

TEST(Alloc, ZerosHasRequestedShape) {
  Rng rng(1);
  Tensor t = alloc({2, 3}, Init::zeros(), rng);
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  ASSERT_EQ(t.size(), 6u);
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(Alloc, SameSeedSameValues) {
  Rng a(2023), b(2023);
  Tensor x = alloc({4}, Init::uniform(-1, 1), a);
  Tensor y = alloc({4}, Init::uniform(-1, 1), b);
  EXPECT_TRUE(testing::bitwise_equal(x.values(), y.values()));
}

TEST(Alloc, ScaledUniformRespectsFanInBound) {
  Rng rng(7);
  const double bound = 1.0 / std::sqrt(3.0);
  for (int rep = 0; rep < 50; ++rep) {
    Tensor t = alloc({3, 3}, Init::scaled_uniform(3), rng);
    for (double v : t.values()) {
      EXPECT_LE(std::abs(v), bound);
    }
  }
}

TEST(Alloc, ZeroExtentIsShapeError) {
  Rng rng(0);
  EXPECT_EQ(code_of([&] { alloc({2, 0}, Init::zeros(), rng); }), ErrorCode::kShape);
  EXPECT_EQ(code_of([&] { Tensor::zeros({}); }), ErrorCode::kShape);
}

TEST(Kernels, IdentityMatmul) {
  Rng rng(3);
  Tensor a = random_tensor({3, 5}, rng);
  Tensor eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_TRUE(testing::bitwise_equal(matmul(eye, a).values(), a.values()));
}

TEST(Kernels, AddVectors) {
  Tensor y = add(Tensor::from_values({2}, {1, 2}), Tensor::from_values({2}, {3, 4}));
  EXPECT_EQ(testing::to_vector(y), (std::vector<double>{4, 6}));
}

TEST(Kernels, AddBroadcastsLeadingAxesOnly) {
  Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_values({3}, {10, 20, 30});
  EXPECT_EQ(testing::to_vector(add(a, b)), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  Tensor col = Tensor::from_values({2}, {1, 1});
  EXPECT_EQ(code_of([&] { add(a, col); }), ErrorCode::kShape);
}

TEST(Kernels, ConcatShape) {
  Tensor y = concat(Tensor::zeros({2, 3}), Tensor::zeros({2, 5}), 1);
  EXPECT_EQ(y.shape(), (Shape{2, 8}));
}

TEST(Kernels, MismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x2]"), std::string::npos);
  }
}

TEST(Kernels, SliceOfConcatRecoversOperands) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> ext(1, 4);
    const std::size_t axis = trial % 3;
    Shape sa{ext(rng), ext(rng), ext(rng)};
    Shape sb = sa;
    sb[axis] = ext(rng);
    Tensor a = random_tensor(sa, rng, false);
    Tensor b = random_tensor(sb, rng, false);
    Tensor c = concat(a, b, axis);
    EXPECT_TRUE(testing::bitwise_equal(slice(c, 0, sa[axis], axis).values(), a.values()));
    EXPECT_TRUE(testing::bitwise_equal(slice(c, sa[axis], sa[axis] + sb[axis], axis).values(), b.values()));
  }
}

TEST(Kernels, SumAndMeanAlongAxis) {
  Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(testing::to_vector(sum(a, 0)), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(testing::to_vector(mean(a, 1)), (std::vector<double>{2, 5}));
  EXPECT_EQ(sum_all(a).item(), 21.0);
}

TEST(Backward, ProductRule) {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = Tensor::scalar(3.0, true);
  backward(mul(x, y));
  EXPECT_EQ(x.grad()[0], 3.0);
  EXPECT_EQ(y.grad()[0], 2.0);
}

TEST(Backward, ChainRule) {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor y = Tensor::scalar(1.0, true);
  backward(mul(add(x, y), x));
  EXPECT_EQ(x.grad()[0], 5.0);
  EXPECT_EQ(y.grad()[0], 2.0);
}

TEST(Backward, NonScalarRootIsRankError) {
  Tensor x = Tensor::zeros({2}, true);
  EXPECT_EQ(code_of([&] { backward(scale(x, 2.0)); }), ErrorCode::kRank);
}

TEST(Backward, LeavesOffThePathGetZeroGrad) {
  Tensor x = Tensor::scalar(2.0, true);
  Tensor unused = Tensor::from_values({3}, {1, 2, 3}, true);
  std::vector<Tensor> leaves{x, unused};
  backward(mul(x, x), leaves);
  EXPECT_EQ(x.grad()[0], 4.0);
  ASSERT_EQ(unused.grad().size(), 3u);
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, GraphIsTopologicallyOrdered) {
  Tensor x = Tensor::scalar(1.5, true);
  Tensor y = mul(x, x);
  Tensor z = add(y, x);
  const Graph g = Graph::trace(sum_all(z));
  std::vector<const detail::Node*> seen;
  for (const auto* n : g.order()) {
    for (const auto& in : n->inputs) {
      if (!in->requires_grad) continue;
      EXPECT_NE(std::find(seen.begin(), seen.end(), in.get()), seen.end()) << n->op;
    }
    seen.push_back(n);
  }
}

TEST(FiniteDiff, QuadraticIsExact) {
  Tensor x = Tensor::scalar(3.0, true);
  std::vector<Tensor> params{x};
  const double err = finite_diff_check([&] { return mul(x, x); }, params, 1e-3);
  EXPECT_LT(err, 1e-9);
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(FiniteDiff, ZeroStepIsRejected) {
  Tensor x = Tensor::scalar(3.0, true);
  std::vector<Tensor> params{x};
  EXPECT_EQ(code_of([&] { finite_diff_check([&] { return mul(x, x); }, params, 0.0); }),
            ErrorCode::kDeterminism);
}

TEST(FiniteDiff, StochasticFunctionIsRejected) {
  Tensor x = Tensor::scalar(3.0, true);
  std::vector<Tensor> params{x};
  Rng rng(5);
  auto noisy = [&] { return add(x, Tensor::scalar(std::uniform_real_distribution<double>()(rng))); };
  EXPECT_EQ(code_of([&] { finite_diff_check(noisy, params); }), ErrorCode::kDeterminism);
}

// Every kernel against central differences on random inputs in [-1, 1].
class KernelGradients : public ::testing::Test {
 protected:
  Rng rng{2023};

  void expect_grad_ok(const std::function<Tensor()>& f, std::vector<Tensor> params) {
    EXPECT_LT(finite_diff_check(f, params, 1e-5), 1e-4);
  }
};

TEST_F(KernelGradients, Matmul) {
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  Tensor w = random_tensor({3, 2}, rng, false);
  expect_grad_ok([&] { return sum_all(mul(matmul(a, b), w)); }, {a, b});
}

TEST_F(KernelGradients, AddSubMulBroadcast) {
  Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({4}, rng), c = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({2, 3, 4}, rng, false);
  expect_grad_ok([&] { return sum_all(mul(sub(mul(add(a, b), c), b), w)); }, {a, b, c});
}

TEST_F(KernelGradients, ConcatSliceTranspose) {
  Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 2}, rng);
  Tensor w = random_tensor({4, 2}, rng, false);
  expect_grad_ok([&] { return sum_all(mul(transpose(slice(concat(a, b, 1), 1, 5, 1)), w)); }, {a, b});
}

TEST_F(KernelGradients, Reductions) {
  Tensor a = random_tensor({3, 4}, rng);
  Tensor w0 = random_tensor({4}, rng, false), w1 = random_tensor({3}, rng, false);
  expect_grad_ok([&] { return add(sum_all(mul(sum(a, 0), w0)), sum_all(mul(mean(a, 1), w1))); }, {a});
}

TEST_F(KernelGradients, ReshapeAndScale) {
  Tensor a = random_tensor({2, 6}, rng);
  Tensor w = random_tensor({3, 4}, rng, false);
  expect_grad_ok([&] { return sum_all(mul(scale(reshape(a, {3, 4}), -1.7), w)); }, {a});
}

TEST_F(KernelGradients, Nonlinearities) {
  Tensor a = random_tensor({3, 5}, rng);
  Tensor w = random_tensor({3, 5}, rng, false);
  expect_grad_ok([&] { return sum_all(mul(add(sigmoid(a), tanh(a)), w)); }, {a});
  expect_grad_ok([&] { return sum_all(mul(softmax_last(a), w)); }, {a});
}

TEST_F(KernelGradients, LayerNorm) {
  Tensor x = random_tensor({3, 6}, rng), g = random_tensor({6}, rng), b = random_tensor({6}, rng);
  Tensor w = random_tensor({3, 6}, rng, false);
  expect_grad_ok([&] { return sum_all(mul(layer_norm_last(x, g, b, 1e-5), w)); }, {x, g, b});
}

TEST_F(KernelGradients, WeightedNll) {
  Tensor logits = random_tensor({4, 3}, rng);
  const std::vector<int> labels{0, 2, -1, 1};
  const std::vector<double> w{1.0, 0.3, 1.0, 0.7};
  expect_grad_ok([&] { return weighted_nll(softmax_last(logits), labels, w, 3.0); }, {logits});
}

TEST_F(KernelGradients, RandomThreeLayerComposition) {
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor({3, 4}, rng);
    Tensor w1 = random_tensor({4, 5}, rng), w2 = random_tensor({5, 5}, rng), w3 = random_tensor({5, 2}, rng);
    Tensor b1 = random_tensor({5}, rng);
    expect_grad_ok(
        [&] {
          Tensor h1 = tanh(add(matmul(x, w1), b1));
          Tensor h2 = sigmoid(matmul(h1, w2));
          return sum_all(softmax_last(matmul(mul(h2, h1), w3)));
        },
        {x, w1, w2, w3, b1});
  }
}

TEST(Determinism, ForwardIsBitwiseReproducible) {
  auto run = [] {
    Rng rng(99);
    Tensor a = random_tensor({4, 4}, rng), b = random_tensor({4, 4}, rng);
    return testing::to_vector(softmax_last(matmul(tanh(a), b)));
  };
  const auto first = run();
  const auto second = run();
  EXPECT_TRUE(testing::bitwise_equal(first, second));
}

}  // namespace
}  // namespace ernetcl
