#include <gtest/gtest.h>

#include <cmath>

#include "complab/json_io.hpp"
#include "complab/relu_net.hpp"
#include "complab/spline.hpp"

using namespace complab;

namespace {

// Central finite differences of the batch loss over all parameters.
std::vector<double> fd_gradient(const ReluNet2& net, const Batch& batch,
                                double step = 1e-5) {
  std::vector<double> p = net.flatten();
  std::vector<double> g(p.size());
  ReluNet2 probe = net;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<double> q = p;
    q[i] = p[i] + step;
    probe.unflatten(q);
    const double up = backprop(probe, batch).first;
    q[i] = p[i] - step;
    probe.unflatten(q);
    const double dn = backprop(probe, batch).first;
    g[i] = (up - dn) / (2.0 * step);
  }
  return g;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) /
                        std::max({1.0, std::abs(a[i]), std::abs(b[i])}));
  return m;
}

Batch random_batch(Rng& rng, std::size_t n, std::size_t in, std::size_t out) {
  Batch b;
  for (std::size_t s = 0; s < n; ++s) {
    Vec x(in), y(out);
    for (auto& v : x) v = rng.uniform(-2, 2);
    for (auto& v : y) v = rng.uniform(-2, 2);
    b.x.push_back(x);
    b.y.push_back(y);
  }
  return b;
}

}  // namespace

TEST(Eval, SingleReluUnit) {
  ReluNet2 n = ReluNet2::zeros(1, 1, 1);
  n.w1[0] = 1.0;
  n.w2[0] = 1.0;
  EXPECT_DOUBLE_EQ(n.eval1(2.0)[0], 2.0);
  EXPECT_DOUBLE_EQ(n.eval1(-1.0)[0], 0.0);
}

TEST(Eval, ZeroHiddenIsConstant) {
  ReluNet2 n = ReluNet2::zeros(1, 1, 0);
  n.b2[0] = 3.5;
  EXPECT_DOUBLE_EQ(n.eval1(-100.0)[0], 3.5);
  EXPECT_DOUBLE_EQ(n.eval1(7.0)[0], 3.5);
}

TEST(Complexity, UnitNetAndEmptyNet) {
  ReluNet2 n = ReluNet2::zeros(1, 1, 1);
  n.w1[0] = 1.0;
  n.w2[0] = 1.0;
  EXPECT_DOUBLE_EQ(complexity(n), 1.0);
  EXPECT_DOUBLE_EQ(complexity(ReluNet2::zeros(1, 1, 0)), 0.0);
}

TEST(CompileSpline, MatchesSplineOnGrid) {
  const LinearSpline f({{-0.5, 1.0}, {0.25, 2.0}, {1.0, 0.5}}, 0.3, -0.7);
  const ReluNet2 n = compile_spline(f, -1.0, 2.0);
  for (int g = 0; g <= 1000; ++g) {
    const double x = -1.0 + 3.0 * g / 1000.0;
    EXPECT_NEAR(n.eval1(x)[0], f(x), 1e-9);
  }
}

TEST(CompileSpline, ConstantCompilesToEmptyNet) {
  const ReluNet2 n = compile_spline(LinearSpline::constant(2.0), 0.0, 1.0);
  EXPECT_EQ(n.hidden, 0u);
  EXPECT_DOUBLE_EQ(complexity(n), 0.0);
  EXPECT_DOUBLE_EQ(n.eval1(0.3)[0], 2.0);
}

TEST(CompileSpline, AbsoluteValueCost) {
  // |x| on [-1,1]: slope -1 then +1; C = |delta alpha| + |entering slope|
  const LinearSpline f({{0.0, 0.0}}, -1.0, 1.0);
  const ReluNet2 n = compile_spline(f, -1.0, 1.0);
  EXPECT_DOUBLE_EQ(complexity(n), 2.0 + 1.0);
  for (double x : {-1.0, -0.4, 0.0, 0.7, 1.0})
    EXPECT_NEAR(n.eval1(x)[0], std::abs(x), 1e-12);
}

TEST(CompileSpline, IdentityLineCostIndependentOfRange) {
  const auto f = LinearSpline::line(1.0, 0.0);
  const ReluNet2 a = compile_spline(f, 0.0, 10.0);
  const ReluNet2 b = compile_spline(f, 0.0, 1000.0);
  EXPECT_DOUBLE_EQ(complexity(a), 1.0);
  EXPECT_DOUBLE_EQ(complexity(b), 1.0);
}

TEST(CompileSpline, RejectsBadDomain) {
  const auto f = LinearSpline::line(1.0, 0.0);
  EXPECT_THROW(compile_spline(f, 2.0, 1.0), std::invalid_argument);
  EXPECT_THROW(compile_spline(f, 1.0, 2.0), std::invalid_argument);  // knot at 0
  EXPECT_THROW(
      compile_spline(f, -std::numeric_limits<double>::infinity(), 1.0),
      std::invalid_argument);
}

TEST(CompileSpline, ComplexityDominatesSplineNorm) {
  Rng rng(5);
  for (int t = 0; t < 40; ++t) {
    std::vector<LinearSpline::Knot> ks;
    double x = rng.uniform(-3, -2);
    const int m = 1 + static_cast<int>(rng.uniform_int(0, 5));
    for (int i = 0; i < m; ++i) {
      ks.push_back({x, rng.uniform(-2, 2)});
      x += rng.uniform(0.2, 1.0);
    }
    const LinearSpline f(ks, rng.uniform(-2, 2), rng.uniform(-2, 2));
    const ReluNet2 n = compile_spline(f, -4.0, x + 1.0);
    EXPECT_GE(complexity(n), spline_norm(f) - 1e-12);
  }
}

TEST(Backprop, MatchesFiniteDifferences) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const std::size_t in = 1 + t % 2, out = 1 + (t / 2) % 2;
    const ReluNet2 n = ReluNet2::random(in, out, 8, 1000 + t);
    const Batch batch = random_batch(rng, 10, in, out);
    const auto [loss, g] = backprop(n, batch);
    (void)loss;
    EXPECT_LE(max_rel_err(g.flatten(), fd_gradient(n, batch)), 1e-4)
        << "trial " << t;
  }
}

TEST(Backprop, ZeroResidualGivesZeroGradient) {
  ReluNet2 n = ReluNet2::random(1, 1, 4, 99);
  Batch b;
  for (double x : {-1.0, 0.2, 1.3}) {
    b.x.push_back({x});
    b.y.push_back(n.eval1(x));
  }
  const auto [loss, g] = backprop(n, b);
  EXPECT_DOUBLE_EQ(loss, 0.0);
  EXPECT_DOUBLE_EQ(g.max_abs(), 0.0);
}

TEST(Backprop, AllActiveReducesToLinearRegression) {
  // single always-active unit: f(x) = w2 * (w1 x + b1) + b2 for x > 0 region
  ReluNet2 n = ReluNet2::zeros(1, 1, 1);
  n.w1[0] = 1.0;
  n.b1[0] = 10.0;  // active for all |x| < 10
  n.w2[0] = 2.0;
  n.b2[0] = 0.5;
  Batch b;
  b.x = {{1.0}, {2.0}};
  b.y = {{0.0}, {0.0}};
  const auto [loss, g] = backprop(n, b);
  (void)loss;
  // residuals r_i = 2(x_i+10)+0.5; dL/dw2 = mean 2 r_i a_i, a_i = x_i+10
  const double r1 = 2.0 * 11.0 + 0.5, r2 = 2.0 * 12.0 + 0.5;
  EXPECT_NEAR(g.w2[0], (2.0 * r1 * 11.0 + 2.0 * r2 * 12.0) / 2.0, 1e-12);
  EXPECT_NEAR(g.w1[0], (2.0 * r1 * 2.0 * 1.0 + 2.0 * r2 * 2.0 * 2.0) / 2.0,
              1e-12);
  EXPECT_NEAR(g.b1[0], (2.0 * r1 * 2.0 + 2.0 * r2 * 2.0) / 2.0, 1e-12);
}

TEST(Train, FitsLine) {
  Rng rng(3);
  Batch b;
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform(-1, 1);
    b.x.push_back({x});
    b.y.push_back({2.0 * x});
  }
  TrainConfig cfg;
  cfg.lr = 0.05;
  cfg.momentum = 0.9;
  cfg.epochs = 2000;
  const auto res = train(ReluNet2::random(1, 1, 8, 7), b, cfg);
  EXPECT_LE(res.trace.back(), 1e-4);
}

TEST(Train, ZeroEpochsReturnsInitialNet) {
  const ReluNet2 n = ReluNet2::random(1, 1, 6, 42);
  Batch b;
  b.x = {{0.0}};
  b.y = {{1.0}};
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto res = train(n, b, cfg);
  EXPECT_EQ(res.net.param_hash(), n.param_hash());
  EXPECT_TRUE(res.trace.empty());
}

TEST(Train, DeterministicTraces) {
  Batch b;
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    b.x.push_back({rng.uniform(-1, 1)});
    b.y.push_back({rng.uniform(-1, 1)});
  }
  TrainConfig cfg;
  cfg.lr = 0.02;
  cfg.epochs = 200;
  cfg.weight_decay = 1e-3;
  cfg.seed = 5;
  const auto r1 = train(ReluNet2::random(1, 1, 8, cfg.seed), b, cfg);
  const auto r2 = train(ReluNet2::random(1, 1, 8, cfg.seed), b, cfg);
  ASSERT_EQ(r1.trace.size(), r2.trace.size());
  for (std::size_t i = 0; i < r1.trace.size(); ++i)
    EXPECT_EQ(r1.trace[i], r2.trace[i]);  // bit-identical
  EXPECT_EQ(r1.net.param_hash(), r2.net.param_hash());
}

TEST(Train, WeightDecayNeverShrinksBiases) {
  ReluNet2 n = ReluNet2::zeros(1, 1, 2);
  n.b1 = {0.7, -0.3};
  n.b2 = {1.1};
  Batch b;
  b.x = {{0.0}};
  b.y = {{n.eval1(0.0)[0]}};  // zero residual: only decay acts
  TrainConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  cfg.epochs = 10;
  const auto res = train(n, b, cfg);
  EXPECT_EQ(res.net.b1, n.b1);
  EXPECT_EQ(res.net.b2, n.b2);
}

TEST(Concat, StacksUnivariateNets) {
  const ReluNet2 a = ReluNet2::random(1, 1, 3, 1);
  const ReluNet2 b = ReluNet2::random(1, 1, 5, 2);
  const ReluNet2 c = concat_univariate({a, b});
  EXPECT_EQ(c.out_dim, 2u);
  EXPECT_EQ(c.hidden, 8u);
  for (double x : {-1.5, 0.0, 0.8}) {
    const Vec y = c.eval1(x);
    EXPECT_NEAR(y[0], a.eval1(x)[0], 1e-12);
    EXPECT_NEAR(y[1], b.eval1(x)[0], 1e-12);
  }
  EXPECT_NEAR(complexity(c), complexity(a) + complexity(b), 1e-12);
}

TEST(Serialization, JsonRoundTrip) {
  const ReluNet2 n = ReluNet2::random(2, 3, 4, 77);
  const ReluNet2 m = net_from_json(net_to_json(n));
  EXPECT_EQ(n.param_hash(), m.param_hash());
  EXPECT_EQ(m.in_dim, 2u);
  EXPECT_EQ(m.out_dim, 3u);
}

TEST(GradCheck, TwentyRandomArchitecturePoints) {
  for (int t = 0; t < 20; ++t) {
    Rng rng(500 + t);
    const ReluNet2 n =
        ReluNet2::random(1, 1 + t % 3, 4 + t % 5, 2000 + t);
    const Batch batch = random_batch(rng, 6, 1, 1 + t % 3);
    const auto g = backprop(n, batch).second;
    EXPECT_LE(max_rel_err(g.flatten(), fd_gradient(n, batch)), 1e-4)
        << "point " << t;
  }
}
