#include "ddgan/errors.hpp"
#include "ddgan/gradcheck.hpp"
#include "ddgan/ops.hpp"
#include "ddgan/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ddgan;

namespace {

std::vector<double> as_vector(const Tensord& t) { return {t.data().data(), t.data().data() + t.size()}; }

}  // namespace

TEST(Conv2d, ScalarKernelScales) {
  auto x = Tensorf::full({1, 1, 2, 2}, 1.0f);
  auto y = conv2d(x, Tensorf::from({1, 1, 1, 1}, {2.0f}), Tensorf::from({1}, {0.0f}), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(y[i], 2.0f);
}

TEST(Conv2d, AveragingKernelGivesMean) {
  auto x = Tensord::from({1, 1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto y = conv2d(x, Tensord::full({1, 1, 3, 3}, 1.0 / 9), Tensord::from({1}, {0.0}), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_NEAR(y[0], 3.0 / 9, 1e-15);
}

TEST(Conv2d, MatchesBruteForceLoops) {
  Rng rng(11);
  for (int s : {1, 2}) {
    for (int p : {0, 1, 2}) {
      auto x = sample_uniform<double>(rng, {2, 3, 7, 6}, -1, 1);
      auto k = sample_uniform<double>(rng, {4, 3, 3, 3}, -1, 1);
      auto b = sample_uniform<double>(rng, {4}, -1, 1);
      Index ho, wo;
      const auto ref = oracle::conv2d(as_vector(x), 2, 3, 7, 6, as_vector(k), 4, 3, as_vector(b), s, p, ho, wo);
      const auto y = conv2d(x, k, b, s, p);
      ASSERT_EQ(y.shape(), (Shape{2, 4, ho, wo}));
      for (Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[static_cast<std::size_t>(i)], 1e-12);
    }
  }
}

TEST(Conv2d, SumGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<Tensord> in{sample_uniform<double>(rng, {2, 3, 8, 8}, -1, 1),
                            sample_uniform<double>(rng, {4, 3, 3, 3}, -1, 1), sample_uniform<double>(rng, {4}, -1, 1)};
    for (auto& t : in) t.set_requires_grad(true);
    const auto r = check_gradients(
        "conv2d", [](const std::vector<Tensord>& v) { return sum(conv2d(v[0], v[1], v[2], 2, 1)); }, in);
    EXPECT_TRUE(r.passed) << "seed " << seed << " max rel err " << r.max_rel_error;
  }
}

TEST(Conv2d, ShapeMismatchNamesAxis) {
  auto x = Tensorf::zeros({1, 2, 4, 4});
  try {
    conv2d(x, Tensorf::zeros({1, 3, 3, 3}), Tensorf::zeros({1}), 1, 0);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), 1);
  }
  EXPECT_THROW(conv2d(Tensorf::zeros({1, 1, 2, 2}), Tensorf::zeros({1, 1, 3, 3}), Tensorf::zeros({1}), 1, 0),
               DimensionError);
  EXPECT_THROW(conv2d(Tensorf::zeros({1, 1, 4, 4}), Tensorf::zeros({1, 1, 3, 3}), Tensorf::zeros({1}), 0, 0),
               std::invalid_argument);  // a bad stride is not a shape problem
}

TEST(Deconv2d, SinglePixelBroadcast) {
  auto y = deconv2d(Tensorf::from({1, 1, 1, 1}, {1.0f}), Tensorf::full({1, 1, 2, 2}, 1.0f), Tensorf::zeros({1}), 2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(y[i], 1.0f);
}

TEST(Deconv2d, StrideTwoIsBlockConstant) {
  auto y = deconv2d(Tensorf::from({1, 1, 2, 2}, {1, 2, 3, 4}), Tensorf::full({1, 1, 2, 2}, 1.0f), Tensorf::zeros({1}),
                    2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const float expected[16] = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (Index i = 0; i < 16; ++i) EXPECT_EQ(y[i], expected[i]);
}

TEST(Deconv2d, MatchesScatterOracle) {
  Rng rng(5);
  auto x = sample_uniform<double>(rng, {2, 3, 4, 5}, -1, 1);
  auto k = sample_uniform<double>(rng, {3, 2, 4, 4}, -1, 1);
  Index ho, wo;
  const auto ref = oracle::deconv2d(as_vector(x), 2, 3, 4, 5, as_vector(k), 2, 4, 2, 1, ho, wo);
  const auto y = deconv2d(x, k, Tensord::zeros({2}), 2, 1);
  ASSERT_EQ(y.shape(), (Shape{2, 2, ho, wo}));
  for (Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[static_cast<std::size_t>(i)], 1e-12);
}

TEST(Deconv2d, AdjointOfConv) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int s = 1 + static_cast<int>(rng.below(2)), p = static_cast<int>(rng.below(2)), k = 3;
    const Index h = 6 + s * static_cast<Index>(rng.below(2));
    auto x = sample_uniform<double>(rng, {2, 3, h, h}, -1, 1);
    auto kern = sample_uniform<double>(rng, {4, 3, k, k}, -1, 1);
    if ((h + 2 * p - k) % s != 0) continue;
    auto cx = conv2d(x, kern, Tensord::zeros({4}), s, p);
    auto y = sample_uniform<double>(rng, cx.shape(), -1, 1);
    auto dy = deconv2d(y, kern, Tensord::zeros({3}), s, p);
    ASSERT_EQ(dy.shape(), x.shape());
    const double lhs = (cx.data() * y.data()).sum(), rhs = (x.data() * dy.data()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Upsample, NearestExamples) {
  auto y = upsample_nearest(Tensorf::from({1, 1, 1, 1}, {5.0f}), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(y[i], 5.0f);

  Rng rng(1);
  auto x = sample_normal<float>(rng, {2, 3, 4, 4});
  auto id = upsample_nearest(x, 1);
  EXPECT_TRUE((id.data() == x.data()).all());
}

TEST(Upsample, NearestGradientCountsReplicas) {
  auto x = Tensorf::from({1, 1, 2, 2}, {1, 2, 3, 4}, true);
  sum(upsample_nearest(x, 2)).backward();
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(x.grad()[i], 4.0f);
}

TEST(Downsample, Examples) {
  auto c = downsample_avg(Tensorf::full({1, 2, 4, 4}, 0.25f), 2);
  ASSERT_EQ(c.shape(), (Shape{1, 2, 2, 2}));
  for (Index i = 0; i < c.size(); ++i) EXPECT_EQ(c[i], 0.25f);
  EXPECT_EQ(downsample_avg(Tensorf::from({1, 1, 2, 2}, {1, 3, 5, 7}), 2)[0], 4.0f);
  EXPECT_THROW(downsample_avg(Tensorf::zeros({1, 1, 3, 4}), 2), DimensionError);
}

TEST(Downsample, InvertsNearestUpsampling) {
  Rng rng(9);
  for (int factor : {2, 3, 4}) {
    for (int trial = 0; trial < 10; ++trial) {
      auto x = sample_uniform<double>(rng, {2, 3, 5, 4}, -1, 1);
      auto back = downsample_avg(upsample_nearest(x, factor), factor);
      ASSERT_EQ(back.shape(), x.shape());
      for (Index i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-15);
    }
  }
}

TEST(Activations, PointValues) {
  EXPECT_FLOAT_EQ(leaky_relu(Tensorf::scalar(-2.0f), 0.2f).item(), -0.4f);
  EXPECT_FLOAT_EQ(leaky_relu(Tensorf::scalar(3.0f), 0.2f).item(), 3.0f);
  EXPECT_EQ(tanh(Tensorf::scalar(0.0f)).item(), 0.0f);
  EXPECT_EQ(sigmoid(Tensorf::scalar(0.0f)).item(), 0.5f);
}

TEST(Dense, MatchesHandProduct) {
  auto x = Tensorf::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto w = Tensorf::from({3, 2}, {1, 0, 0, 1, 1, 1});
  auto y = dense(x, w, Tensorf::from({2}, {0.5f, -0.5f}));
  ASSERT_EQ(y.shape(), (Shape{2, 2}));
  EXPECT_FLOAT_EQ(y[0], 4.5f);
  EXPECT_FLOAT_EQ(y[1], 4.5f);
  EXPECT_FLOAT_EQ(y[2], 10.5f);
  EXPECT_FLOAT_EQ(y[3], 10.5f);
}

TEST(BatchNorm, HandNormalization) {
  // Channel 0: {1, 5, 1, 5} has mean 3, variance 4.
  auto x = Tensord::from({4, 1}, {1, 5, 1, 5});
  BatchNormOptions opt;
  opt.epsilon = 1e-12;
  auto y = batch_norm(x, Tensord::from({1}, {1.0}), Tensord::from({1}, {0.0}), opt);
  const double expected[4] = {-1, 1, -1, 1};
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expected[i], 1e-9);
}

TEST(BatchNorm, RunningStatisticsAndInference) {
  auto x = Tensord::from({4, 1}, {1, 5, 1, 5});
  Buffer<double> rm = Buffer<double>::Zero(1), rv = Buffer<double>::Ones(1);
  BatchNormOptions opt;
  batch_norm(x, Tensord::from({1}, {1.0}), Tensord::from({1}, {0.0}), opt, &rm, &rv);
  EXPECT_NEAR(rm[0], 0.1 * 3.0, 1e-12);
  // Running variance folds in the unbiased estimate 16/3.
  EXPECT_NEAR(rv[0], 0.9 + 0.1 * 16.0 / 3.0, 1e-12);
  opt.training = false;
  auto y = batch_norm(Tensord::from({1, 1}, {rm[0]}), Tensord::from({1}, {2.0}), Tensord::from({1}, {0.5}), opt, &rm, &rv);
  EXPECT_NEAR(y[0], 0.5, 1e-12);
  EXPECT_THROW(batch_norm(x, Tensord::from({1}, {1.0}), Tensord::from({1}, {0.0}), opt), std::invalid_argument);
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensorf::full({2, 3, 4}, 0.7f, true);
  sum(x).backward();
  for (Index i = 0; i < x.size(); ++i) EXPECT_EQ(x.grad()[i], 1.0f);
}

TEST(Backward, Quadratic) {
  auto x = Tensorf::from({2}, {1, 2}, true);
  sum(mul(x, x)).backward();
  EXPECT_EQ(x.grad()[0], 2.0f);
  EXPECT_EQ(x.grad()[1], 4.0f);
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto x = Tensorf::from({2}, {1, 2}, true);
  auto loss = sum(mul(x, x));
  loss.backward();
  loss.backward();
  EXPECT_EQ(x.grad()[0], 4.0f);
  EXPECT_EQ(x.grad()[1], 8.0f);
  x.zero_grad();
  loss.backward();
  EXPECT_EQ(x.grad()[1], 4.0f);
}

TEST(Backward, FanOutSumsContributions) {
  Rng rng(4);
  auto x = sample_uniform<double>(rng, {3, 4}, -1, 1);
  x.set_requires_grad(true);
  // One graph with three consumers of x ...
  sum(add(add(tanh(x), square(x)), scale(x, 3.0))).backward();
  const Buffer<double> joint = x.grad();
  // ... against three separate graphs.
  Buffer<double> separate = Buffer<double>::Zero(x.size());
  for (int k = 0; k < 3; ++k) {
    x.zero_grad();
    (k == 0 ? sum(tanh(x)) : k == 1 ? sum(square(x)) : sum(scale(x, 3.0))).backward();
    separate += x.grad();
  }
  for (Index i = 0; i < x.size(); ++i) EXPECT_NEAR(joint[i], separate[i], 1e-14);
}

TEST(Backward, NonScalarLossThrows) {
  auto x = Tensorf::full({2}, 1.0f, true);
  EXPECT_THROW(square(x).backward(), DimensionError);
}

TEST(Backward, ReachableLeavesGetGradients) {
  auto a = Tensorf::full({2, 2}, 0.5f, true), b = Tensorf::full({2, 2}, -0.5f, true), c = Tensorf::full({2, 2}, 1.0f);
  sum(mul(add(a, c), b)).backward();
  EXPECT_TRUE(a.has_grad());
  EXPECT_TRUE(b.has_grad());
  EXPECT_FALSE(c.has_grad());
}

TEST(Graph, TopologicalOrderVisitsEachNodeOnce) {
  auto x = Tensorf::full({2}, 1.0f, true);
  auto y = tanh(x);
  auto z = sum(add(y, y));
  const auto g = computation_graph(z);
  ASSERT_EQ(g.size(), 4u);  // x, tanh, add, sum
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (auto in : g[i].input_ids) EXPECT_LT(in, g[i].id);
  }
  EXPECT_EQ(g.back().op, "sum");
}

TEST(NoGrad, GuardStopsRecording) {
  auto x = Tensorf::full({2}, 1.0f, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(tanh(x).requires_grad());
  }
  EXPECT_TRUE(tanh(x).requires_grad());
}

TEST(SampleNormal, DeterministicPerSeed) {
  Rng a(42), b(42), c(43);
  auto x = sample_normal<float>(a, {4, 5}), y = sample_normal<float>(b, {4, 5}), z = sample_normal<float>(c, {4, 5});
  EXPECT_TRUE((x.data() == y.data()).all());
  EXPECT_FALSE((x.data() == z.data()).all());
}

TEST(SampleNormal, MomentsOfLargeSample) {
  Rng rng(2024);
  auto x = sample_normal<double>(rng, {100000});
  const double mean = x.data().mean();
  const double var = (x.data() - mean).square().mean();
  EXPECT_LT(std::abs(mean), 0.02);
  EXPECT_LT(std::abs(var - 1.0), 0.02);
}

TEST(RngTest, SplitIsIndependentOfState) {
  Rng a(7), b(7);
  b.next_u64();
  b.normal();
  auto sa = a.split(3), sb = b.split(3);
  for (int i = 0; i < 8; ++i) EXPECT_EQ(sa.next_u64(), sb.next_u64());
  EXPECT_NE(Rng(7).split(3).next_u64(), Rng(7).split(4).next_u64());
}

TEST(RngTest, BelowIsInRange) {
  Rng rng(1);
  std::array<int, 7> hits{};
  for (int i = 0; i < 7000; ++i) ++hits[rng.below(7)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(GradientSuite, EveryCasePasses) {
  const auto results = run_gradient_suite(5);
  EXPECT_GT(results.size(), 20u);
  for (const auto& r : results) EXPECT_TRUE(r.passed) << r.name << " max rel err " << r.max_rel_error;
}

TEST(SoftmaxCrossEntropy, UniformLogits) {
  const int labels[2] = {0, 2};
  auto loss = softmax_cross_entropy(Tensord::zeros({2, 3}), std::span<const int>(labels));
  EXPECT_NEAR(loss.item(), std::log(3.0), 1e-12);
}
