#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "ocgec/error.hpp"
#include "ocgec/numerics/adam.hpp"
#include "ocgec/numerics/grad_check.hpp"
#include "ocgec/numerics/ops.hpp"
#include "ocgec/parallel.hpp"

using namespace ocgec::numerics;
using ocgec::Rng;
using ocgec::testing::random_tensor;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), ocgec::DimensionError);
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t(1, 2), 1.5);
  EXPECT_THROW(t.reshaped({4}), ocgec::DimensionError);
}

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  Tape tape;
  Tensor eye(Shape{3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  Rng rng(3);
  const Tensor b = random_tensor({3, 4}, rng);
  Var out = matmul(tape.constant(eye), tape.constant(b));
  EXPECT_EQ(out.value(), b);
}

TEST(Matmul, HandExpansion) {
  Tape tape;
  Var out = matmul(tape.constant(Tensor::matrix({{1, 2}, {3, 4}})),
                   tape.constant(Tensor::matrix({{0}, {1}})));
  EXPECT_EQ(out.value(), Tensor::matrix({{2}, {4}}));
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  Tape tape;
  EXPECT_THROW(matmul(tape.constant(Tensor(Shape{2, 3})), tape.constant(Tensor(Shape{2, 3}))),
               ocgec::DimensionError);
}

TEST(Matmul, GradientOfSumIsOnesTimesBTransposed) {
  Rng rng(11);
  const Tensor a = random_tensor({5, 7}, rng);
  const Tensor b = random_tensor({7, 3}, rng);

  Tape tape;
  Var va = tape.variable(a);
  tape.backward(sum(matmul(va, tape.constant(b))));
  const Tensor grad = tape.grad(va);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t p = 0; p < 7; ++p) {
      double expected = 0.0;
      for (std::size_t j = 0; j < 3; ++j) expected += b(p, j);
      EXPECT_NEAR(grad(i, p), expected, 1e-12);
    }
  }

  const ScalarFn f = [&b](Tape& t, Var x) { return sum(matmul(x, t.constant(b))); };
  EXPECT_LT(grad_check(f, a, 1e-5), 1e-6);
}

TEST(Conv2d, AllOnesGivesNine) {
  Tape tape;
  Var out = conv2d(tape.constant(Tensor(Shape{1, 3, 3}, 1.0)),
                   tape.constant(Tensor(Shape{1, 1, 3, 3}, 1.0)), tape.constant(Tensor(Shape{1})));
  ASSERT_EQ(out.shape(), (Shape{1, 1, 1}));
  EXPECT_DOUBLE_EQ(out.value()[0], 9.0);
}

TEST(Conv2d, DeltaFilterIsShiftedCrop) {
  Rng rng(5);
  const Tensor x = random_tensor({2, 6, 5}, rng);
  Tensor w(Shape{1, 2, 3, 2});
  w[((0 * 2 + 1) * 3 + 2) * 2 + 1] = 1.0;  // channel 1, tap (2, 1)
  Tape tape;
  Var out = conv2d(tape.constant(x), tape.constant(w), tape.constant(Tensor(Shape{1})));
  ASSERT_EQ(out.shape(), (Shape{1, 4, 4}));
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(out.value()[y * 4 + c], x[(1 * 6 + y + 2) * 5 + c + 1]);
    }
  }
}

TEST(Conv2d, KernelLargerThanInputThrows) {
  Tape tape;
  EXPECT_THROW(conv2d(tape.constant(Tensor(Shape{1, 2, 2})), tape.constant(Tensor(Shape{1, 1, 3, 3})),
                      tape.constant(Tensor(Shape{1}))),
               ocgec::DimensionError);
  EXPECT_THROW(conv2d(tape.constant(Tensor(Shape{2, 4, 4})), tape.constant(Tensor(Shape{1, 1, 3, 3})),
                      tape.constant(Tensor(Shape{1}))),
               ocgec::DimensionError);
}

TEST(Conv2d, FiniteDifferenceAgreement) {
  Rng rng(21);
  const std::vector<Tensor> point = {random_tensor({2, 5, 6}, rng), random_tensor({3, 2, 3, 2}, rng),
                                     random_tensor({3}, rng)};
  const Tensor weights = random_tensor({3, 3, 5}, rng);
  const MultiScalarFn f = [&weights](Tape& t, std::span<const Var> v) {
    return sum(mul(conv2d(v[0], v[1], v[2]), t.constant(weights)));
  };
  EXPECT_LT(grad_check(f, point, 1e-5), 1e-4);
}

// Every differentiable op passes a finite-difference check on 20 seeds.
TEST(GradientProperty, AllOpsOnTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const std::vector<Tensor> point = {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng),
                                       random_tensor({5}, rng), random_tensor({4, 5}, rng)};
    const Tensor head = random_tensor({20, 3}, rng);
    const std::vector<std::size_t> rows = {1, 3};
    const MultiScalarFn dense_fn = [&](Tape& t, std::span<const Var> v) {
      Var h = add_row_bias(matmul(v[0], v[1]), v[2]);
      Var mixed = mul(sub(h, v[3]), add_scalar(scale(v[3], 0.5), 0.3));
      Var c = zero_rows(add(relu(h), mixed), rows);
      Var logits = reshape(matmul(reshape(c, {1, 20}), t.constant(head)), {3});
      Var joined = concat(std::vector<Var>{v[2], logits});
      std::vector<Var> terms = {softmax_cross_entropy(logits, seed % 3), scale(sum_squares(c), 0.1),
                                sum(joined)};
      return add_n(terms);
    };
    EXPECT_LT(grad_check(dense_fn, point, 1e-6), 1e-4) << "seed " << seed;

    const MultiScalarFn conv_fn = [](Tape&, std::span<const Var> v) {
      return sum_squares(relu(conv2d(v[0], v[1], v[2])));
    };
    const std::vector<Tensor> conv_point = {random_tensor({2, 5, 4}, rng), random_tensor({3, 2, 2, 3}, rng),
                                            random_tensor({3}, rng, 0.1, 0.5)};
    EXPECT_LT(grad_check(conv_fn, conv_point, 1e-6), 1e-4) << "seed " << seed;
  }
}

TEST(GradCheck, SumHasExactGradient) {
  Rng rng(2);
  const ScalarFn f = [](Tape&, Var x) { return sum(x); };
  EXPECT_LT(grad_check(f, random_tensor({6}, rng), 1e-5), 1e-9);
}

TEST(GradCheck, SquaredNormAtOriginHasZeroGradient) {
  const Tensor origin(Shape{4});
  const ScalarFn f = [](Tape&, Var x) { return sum_squares(x); };
  const MultiScalarFn fm = [](Tape&, std::span<const Var> v) { return sum_squares(v[0]); };
  const auto grads = tape_gradients(fm, std::span<const Tensor>(&origin, 1));
  for (double g : grads[0].values()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(grad_check(f, origin, 1e-5), 0.0);
}

TEST(GradCheck, NonFiniteFunctionThrows) {
  const ScalarFn f = [](Tape&, Var x) { return scale(sum(x), std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(grad_check(f, Tensor(Shape{2}, 1.0), 1e-5), ocgec::EvaluationError);
}

TEST(Tape, UnusedValueHasZeroAdjoint) {
  Tape tape;
  Var a = tape.variable(Tensor(Shape{3}, 2.0));
  Var unused = tape.variable(Tensor(Shape{2}, 5.0));
  tape.backward(sum(a));
  EXPECT_EQ(tape.grad(unused), Tensor(Shape{2}));
}

TEST(Tape, BackwardRunsInReverseRecordingOrder) {
  Tape tape;
  std::vector<int> order;
  auto tracer = [&](Var in, int tag) {
    return tape.record(in.value(), {in}, [&order, tag](const Tensor& g, std::span<Tensor* const> grads) {
      order.push_back(tag);
      *grads[0] += g;
    });
  };
  Var x = tape.variable(Tensor::scalar(1.0));
  Var a = tracer(x, 0);
  Var b = tracer(a, 1);
  Var c = tracer(x, 2);
  Var d = tracer(add(b, c), 3);
  tape.backward(d);
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1, 0}));
}

TEST(Tape, BackwardIsLinear) {
  Rng rng(8);
  const Tensor x0 = random_tensor({5}, rng);
  const double alpha = 1.7, beta = -0.4;
  auto f = [](Var x) { return sum_squares(relu(x)); };
  auto g = [](Var x) { return sum(mul(x, x)); };

  auto adjoint = [&](auto fn) {
    Tape tape;
    Var x = tape.variable(x0);
    tape.backward(fn(x));
    return tape.grad(x);
  };
  const Tensor af = adjoint(f);
  const Tensor ag = adjoint(g);
  const Tensor combined = adjoint([&](Var x) { return add(scale(f(x), alpha), scale(g(x), beta)); });
  for (std::size_t i = 0; i < x0.size(); ++i) {
    EXPECT_NEAR(combined[i], alpha * af[i] + beta * ag[i], 1e-12);
  }
}

TEST(Dropout, ZeroRateIsIdentityAndMaskIsSeeded) {
  Tape tape;
  Rng rng(1);
  Var x = tape.variable(Tensor(Shape{100}, 1.0));
  EXPECT_EQ(dropout(x, 0.0, rng).id(), x.id());
  Rng r1(9), r2(9);
  EXPECT_EQ(dropout(x, 0.2, r1).value(), dropout(x, 0.2, r2).value());
  EXPECT_THROW(dropout(x, 1.0, rng), ocgec::SpecError);
}

TEST(Adam, ZeroGradientLeavesParamsAndDecaysMoments) {
  std::vector<Tensor> params = {Tensor::vector({1.0, -2.0})};
  AdamState state(params);
  adam_step(params, std::vector<Tensor>{Tensor::vector({0.5, 0.5})}, state, 0.01);
  const std::vector<Tensor> after_one = params;
  const double m_before = state.first_moment()[0][0];
  adam_step(params, std::vector<Tensor>{Tensor(Shape{2})}, state, 0.01);
  EXPECT_LT(std::abs(state.first_moment()[0][0]), std::abs(m_before));
  EXPECT_EQ(state.step(), 2u);

  std::vector<Tensor> fresh = {Tensor::vector({3.0})};
  AdamState fresh_state(fresh);
  adam_step(fresh, std::vector<Tensor>{Tensor(Shape{1})}, fresh_state, 0.1);
  EXPECT_EQ(fresh[0][0], 3.0);
  EXPECT_EQ(fresh_state.second_moment()[0][0], 0.0);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  std::vector<Tensor> params = {Tensor::vector({0.0, 0.0})};
  AdamState state(params);
  const double lr = 0.001;
  const std::vector<Tensor> grads = {Tensor::vector({3.0, -0.25})};
  Tensor previous = params[0];
  for (int t = 0; t < 500; ++t) {
    previous = params[0];
    adam_step(params, grads, state, lr);
  }
  EXPECT_NEAR(params[0][0] - previous[0], -lr, 1e-9);
  EXPECT_NEAR(params[0][1] - previous[1], lr, 1e-9);
}

TEST(Adam, MatchesScalarOracleOnQuadratic) {
  const double a = 2.5, b = 1.25, lr = 0.05;
  const auto expected = ocgec::oracle::adam_quadratic_trace(-1.0, a, b, lr, 10);
  std::vector<Tensor> params = {Tensor::vector({-1.0})};
  AdamState state(params);
  for (int t = 0; t < 10; ++t) {
    Tape tape;
    Var x = tape.variable(params[0]);
    Var loss = scale(sum_squares(add_scalar(x, -b)), 0.5 * a);
    tape.backward(loss);
    adam_step(params, std::vector<Tensor>{tape.grad(x)}, state, lr);
    EXPECT_NEAR(params[0][0], expected[t], 1e-12) << "step " << t;
  }
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<Tensor> params = {Tensor(Shape{2})};
  AdamState state(params);
  EXPECT_THROW(adam_step(params, std::vector<Tensor>{Tensor(Shape{3})}, state, 0.1),
               ocgec::DimensionError);
}

TEST(ParallelFor, CoversEveryIndexAndPropagatesLowestError) {
  std::vector<int> hits(37, 0);
  ocgec::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  try {
    ocgec::parallel_for(10, 3, [](std::size_t i) {
      if (i == 4 || i == 7) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "4");
  }
}
