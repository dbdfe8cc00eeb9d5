#include <cmath>
#include <cstring>
#include <vector>

#include <gtest/gtest.h>

#include "revise/numcore.hpp"

namespace revise::num {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Independent central-difference oracle: perturbs store entries directly and
// recomputes the forward value; shares nothing with Graph::backward.
double fd_entry(const ScalarFn& f, ParamStore& store, const std::string& name, std::size_t i, double h) {
  Param& p = store.param(name);
  const double saved = p.value[i];
  p.value[i] = saved + h;
  const double up = evaluate(f, store);
  p.value[i] = saved - h;
  const double down = evaluate(f, store);
  p.value[i] = saved;
  return (up - down) / (2 * h);
}

TEST(NumcoreForward, MatmulIdentity) {
  Rng rng(1);
  Graph g;
  Tensor a = random_tensor({3, 3}, rng);
  Var out = matmul(g.constant(Tensor::identity(3)), g.constant(a));
  EXPECT_EQ(out.value(), a);
}

TEST(NumcoreForward, SigmoidOfZero) {
  Graph g;
  EXPECT_DOUBLE_EQ(sigmoid(g.constant(Tensor::scalar(0.0))).value().item(), 0.5);
}

TEST(NumcoreForward, SumOfSquares) {
  Graph g;
  EXPECT_DOUBLE_EQ(sum_squares(g.constant(Tensor(Shape{2}, {3.0, 4.0}))).value().item(), 25.0);
}

TEST(NumcoreForward, ElementaryOps) {
  Graph g;
  Var a = g.constant(Tensor(Shape{1, 3}, {1.0, -2.0, 4.0}));
  Var b = g.constant(Tensor(Shape{1, 3}, {0.5, 0.5, 2.0}));
  EXPECT_EQ(add(a, b).value().values(), (std::vector<double>{1.5, -1.5, 6.0}));
  EXPECT_EQ(sub(a, b).value().values(), (std::vector<double>{0.5, -2.5, 2.0}));
  EXPECT_EQ(mul(a, b).value().values(), (std::vector<double>{0.5, -1.0, 8.0}));
  EXPECT_EQ(scale(a, 2.0).value().values(), (std::vector<double>{2.0, -4.0, 8.0}));
  EXPECT_EQ(relu(a).value().values(), (std::vector<double>{1.0, 0.0, 4.0}));
  EXPECT_DOUBLE_EQ(mean(a).value().item(), 1.0);
  EXPECT_DOUBLE_EQ(log(b).value()[2], std::log(2.0));
  EXPECT_EQ(concat({a, b}).value().shape(), (Shape{1, 6}));
  Var s = g.constant(Tensor::scalar(10.0));
  EXPECT_EQ(add(a, s).value().values(), (std::vector<double>{11.0, 8.0, 14.0}));
  const Tensor sm = softmax_rows(g.constant(Tensor(Shape{1, 2}, {0.0, std::log(3.0)}))).value();
  EXPECT_NEAR(sm[0], 0.25, 1e-15);
  EXPECT_NEAR(sm[1], 0.75, 1e-15);
  EXPECT_TRUE(std::isfinite(softmax_rows(g.constant(Tensor(Shape{1, 2}, {1000.0, -1000.0}))).value()[0]));
}

TEST(NumcoreForward, ShapeMismatchNamesOperands) {
  Graph g;
  Var a = g.constant(Tensor(Shape{2, 3}));
  Var b = g.constant(Tensor(Shape{4, 5}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4x5]"), std::string::npos);
  }
  EXPECT_THROW(add(a, g.constant(Tensor(Shape{3, 2}))), ShapeError);
  EXPECT_THROW(concat({a, b}), ShapeError);
}

TEST(NumcoreBackward, SquareAtThree) {
  ParamStore store;
  store.add("x", Tensor::scalar(3.0));
  Graph g;
  Var x = g.param(store, "x");
  auto grads = g.backward(mul(x, x));
  EXPECT_DOUBLE_EQ(grads.at("x").item(), 6.0);
}

TEST(NumcoreBackward, SigmoidSlopeAtZero) {
  ParamStore store;
  store.add("w", Tensor::scalar(0.0));
  Graph g;
  Var loss = sigmoid(mul(g.param(store, "w"), g.constant(Tensor::scalar(1.0))));
  EXPECT_DOUBLE_EQ(g.backward(loss).at("w").item(), 0.25);
}

TEST(NumcoreBackward, NonScalarLossRejected) {
  ParamStore store;
  store.add("w", Tensor(Shape{2}, {1.0, 2.0}));
  Graph g;
  Var w = g.param(store, "w");
  EXPECT_THROW(g.backward(tanh(w)), ShapeError);
}

TEST(NumcoreBackward, OnlyParametersReceiveGradients) {
  ParamStore store;
  store.add("w", Tensor(Shape{1, 2}, {1.0, 2.0}));
  Graph g;
  Var w = g.param(store, "w");
  Var c = g.constant(Tensor(Shape{1, 2}, {3.0, 4.0}));
  auto grads = g.backward(sum(mul(w, c)));
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_EQ(grads.at("w").values(), (std::vector<double>{3.0, 4.0}));
}

TEST(NumcoreBackward, VisitsEachReachableNodeOnce) {
  ParamStore store;
  store.add("w", Tensor(Shape{1, 2}, {0.3, -0.7}));
  Graph g;
  Var w = g.param(store, "w");
  Var unused = tanh(w);  // not on the loss path
  (void)unused;
  Var h = tanh(w);
  Var loss = add(sum(mul(h, h)), mean(h));  // h reached via two paths
  g.backward(loss);
  // w, h, mul, sum, mean, add
  EXPECT_EQ(g.visited(), 6u);
}

TEST(NumcoreBackward, TwoLayerNetworkMatchesFiniteDifferences) {
  Rng rng(42);
  ParamStore store;
  add_dense(store, "l1", 5, 7, rng);
  add_dense(store, "l2", 7, 3, rng);
  const Tensor input = random_tensor({4, 5}, rng);
  ScalarFn f = [&](Graph& g, const ParamStore& s) {
    Var h = tanh(dense(g, s, "l1", g.constant(input)));
    return sum_squares(dense(g, s, "l2", h));
  };
  Graph g;
  auto grads = g.backward(f(g, store));
  for (const Param& p : std::vector<Param>(store.params())) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double num = fd_entry(f, store, p.name, i, 1e-5);
      EXPECT_NEAR(grads.at(p.name)[i], num, 1e-7 * std::max(1.0, std::abs(num))) << p.name << "[" << i << "]";
    }
  }
}

TEST(NumcoreGradCheck, QuadraticBowl) {
  Rng rng(3);
  ParamStore store;
  store.add("x", random_tensor({1, 6}, rng));
  const Tensor centre = random_tensor({1, 6}, rng);
  ScalarFn f = [&](Graph& g, const ParamStore& s) { return sum_squares(sub(g.param(s, "x"), g.constant(centre))); };
  EXPECT_LT(grad_check(f, store, 1e-5), 1e-7);
}

TEST(NumcoreGradCheck, ConstantFunction) {
  ParamStore store;
  store.add("x", Tensor(Shape{3}, {1.0, 2.0, 3.0}));
  ScalarFn f = [](Graph& g, const ParamStore& s) {
    Var x = g.param(s, "x");
    return add(scale(sum(x), 0.0), g.constant(Tensor::scalar(5.0)));
  };
  auto report = grad_check_report(f, store, 1e-5);
  EXPECT_EQ(report.max_relative_error, 0.0);
  Graph g;
  auto grads = g.backward(f(g, store));
  for (double v : grads.at("x").data()) EXPECT_EQ(v, 0.0);
}

TEST(NumcoreGradCheck, RejectsNonPositiveStep) {
  ParamStore store;
  store.add("x", Tensor::scalar(1.0));
  ScalarFn f = [](Graph& g, const ParamStore& s) { return g.param(s, "x"); };
  EXPECT_THROW(grad_check(f, store, 0.0), ValidationError);
}

// Every differentiable op, composed into a scalar through random weights,
// must agree with central differences on 100 seeds.
TEST(NumcoreProperty, EveryOpMatchesFiniteDifferences) {
  using Op = std::function<Var(Graph&, Var, Var)>;
  const std::vector<std::pair<const char*, Op>> ops = {
      {"matmul", [](Graph&, Var a, Var b) { return matmul(a, reshape(b, {3, 3})); }},
      {"add", [](Graph&, Var a, Var b) { return add(a, b); }},
      {"sub", [](Graph&, Var a, Var b) { return sub(a, b); }},
      {"mul", [](Graph&, Var a, Var b) { return mul(a, b); }},
      {"scale", [](Graph&, Var a, Var) { return scale(a, -1.7); }},
      {"tanh", [](Graph&, Var a, Var) { return tanh(a); }},
      {"sigmoid", [](Graph&, Var a, Var) { return sigmoid(a); }},
      {"relu", [](Graph&, Var a, Var) { return relu(a); }},
      {"mean", [](Graph&, Var a, Var) { return mean(a); }},
      {"sum_squares", [](Graph&, Var a, Var) { return sum_squares(a); }},
      {"log", [](Graph& g, Var a, Var) { return log(add(mul(a, a), g.constant(Tensor::scalar(0.5)))); }},
      {"softplus", [](Graph&, Var a, Var) { return softplus(a); }},
      {"concat", [](Graph&, Var a, Var b) { return concat({a, b}); }},
      {"row_mean", [](Graph&, Var a, Var) { return row_mean(a); }},
      {"softmax_rows", [](Graph&, Var a, Var) { return softmax_rows(a); }},
      {"row_sum", [](Graph&, Var a, Var) { return row_sum(a); }},
      {"scale_rows", [](Graph&, Var a, Var b) { return scale_rows(a, row_mean(b)); }},
      {"add_bias", [](Graph&, Var a, Var b) { return add_bias(a, gather_rows(b, {1})); }},
      {"gather_cols", [](Graph&, Var a, Var) { return gather_cols(a, {2, 0, 2}); }},
      {"repeat_rows", [](Graph&, Var a, Var) { return repeat_rows(gather_rows(a, {0}), 4); }},
      {"clamp", [](Graph&, Var a, Var) { return clamp(a, -0.5, 0.5); }},
  };
  for (const auto& [label, op] : ops) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed * 7919 + 1);
      ParamStore store;
      store.add("a", random_tensor({3, 3}, rng));
      store.add("b", random_tensor({3, 3}, rng));
      Tensor weights;
      {
        Graph probe;
        Var out = op(probe, probe.param(store, "a"), probe.param(store, "b"));
        weights = random_tensor(out.value().shape(), rng);
      }
      ScalarFn f = [&](Graph& g, const ParamStore& s) {
        Var out = op(g, g.param(s, "a"), g.param(s, "b"));
        return sum(mul(out, g.constant(weights)));
      };
      worst = std::max(worst, grad_check(f, store, 1e-5));
    }
    EXPECT_LT(worst, 1e-4) << label;
  }
}

TEST(NumcoreProperty, DeterministicForwardAndBackward) {
  auto run = [] {
    Rng rng(9);
    ParamStore store;
    add_dense(store, "l", 4, 4, rng);
    const Tensor x = random_tensor({2, 4}, rng);
    Graph g;
    Var loss = mean(sigmoid(dense(g, store, "l", g.constant(x))));
    return std::make_pair(loss.value().item(), g.backward(loss));
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  EXPECT_EQ(std::memcmp(&v1, &v2, sizeof v1), 0);
  EXPECT_EQ(g1, g2);
}

TEST(NumcoreProperty, BackwardIsLinear) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    ParamStore store;
    add_dense(store, "l", 3, 2, rng);
    const Tensor x = random_tensor({2, 3}, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    auto f = [&](Graph& g) { return sum_squares(tanh(dense(g, store, "l", g.constant(x)))); };
    auto h = [&](Graph& g) { return mean(sigmoid(dense(g, store, "l", g.constant(x)))); };
    Graph gf, gh, gc;
    auto df = gf.backward(f(gf));
    auto dh = gh.backward(h(gh));
    auto dc = gc.backward(add(scale(f(gc), a), scale(h(gc), b)));
    for (const auto& [name, t] : dc) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        const double expect = a * df.at(name)[i] + b * dh.at(name)[i];
        EXPECT_LE(std::abs(t[i] - expect), 1e-10 * std::max(1e-8, std::abs(expect) + std::abs(t[i])) + 1e-15);
      }
    }
  }
}

TEST(NumcoreOptimizer, SgdStep) {
  ParamStore store;
  store.add("phi", Tensor::scalar(1.0));
  OptimizerConfig cfg{OptimizerKind::sgd, 0.1, 0.0};
  optimizer_step(store, {{"phi", Tensor::scalar(2.0)}}, cfg);
  EXPECT_DOUBLE_EQ(store.value("phi").item(), 0.8);
}

TEST(NumcoreOptimizer, ZeroGradientIsFixedPoint) {
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::adamw}) {
    ParamStore store;
    store.add("phi", Tensor(Shape{2}, {0.5, -1.5}));
    OptimizerConfig cfg{kind, 0.1, 0.0};
    optimizer_step(store, {{"phi", Tensor(Shape{2})}}, cfg);
    EXPECT_EQ(store.value("phi").values(), (std::vector<double>{0.5, -1.5}));
  }
}

TEST(NumcoreOptimizer, AdamwFirstStepMagnitude) {
  // Step 1: m = 0.1, v = 0.001, bias-corrected m_hat = v_hat = 1, so the move
  // is lr / (1 + eps).
  ParamStore store;
  store.add("phi", Tensor::scalar(2.0));
  OptimizerConfig cfg{OptimizerKind::adamw, 0.01, 0.0, 0.9, 0.999, 1e-8};
  optimizer_step(store, {{"phi", Tensor::scalar(1.0)}}, cfg);
  EXPECT_NEAR(2.0 - store.value("phi").item(), 0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(NumcoreOptimizer, DecoupledWeightDecay) {
  ParamStore store;
  store.add("phi", Tensor::scalar(2.0));
  OptimizerConfig cfg{OptimizerKind::adamw, 0.1, 0.5};
  optimizer_step(store, {{"phi", Tensor::scalar(0.0)}}, cfg);
  EXPECT_DOUBLE_EQ(store.value("phi").item(), 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(NumcoreOptimizer, LinearWarmup) {
  ParamStore store;
  store.add("phi", Tensor::scalar(0.0));
  OptimizerConfig cfg{OptimizerKind::sgd, 0.1, 0.0};
  cfg.warmup_steps = 4;
  std::vector<double> moves;
  for (int i = 0; i < 6; ++i) {
    const double before = store.value("phi").item();
    optimizer_step(store, {{"phi", Tensor::scalar(-1.0)}}, cfg);
    moves.push_back(store.value("phi").item() - before);
  }
  const std::vector<double> want{0.025, 0.05, 0.075, 0.1, 0.1, 0.1};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(moves[i], want[i], 1e-15) << i;
}

TEST(NumcoreOptimizer, RejectsMisalignedGradients) {
  ParamStore store;
  store.add("phi", Tensor(Shape{2}));
  EXPECT_THROW(optimizer_step(store, {{"phi", Tensor(Shape{3})}}, OptimizerConfig{}), ShapeError);
  OptimizerConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(optimizer_step(store, {}, bad), ValidationError);
}

TEST(NumcoreParams, NamesUniqueAndShapesFixed) {
  ParamStore store;
  store.add("w", Tensor(Shape{2}));
  EXPECT_THROW(store.add("w", Tensor(Shape{2})), ValidationError);
  EXPECT_THROW(store.set_value("w", Tensor(Shape{3})), ShapeError);
}

TEST(NumcoreCheckpoint, RoundTripIsExact) {
  Rng rng(5);
  ParamStore store(1234);
  add_dense(store, "net", 3, 4, rng);
  store.attributes()["hidden"] = "4";
  Graph g;
  auto grads = g.backward(sum_squares(dense(g, store, "net", g.constant(random_tensor({2, 3}, rng)))));
  optimizer_step(store, grads, OptimizerConfig{});
  const std::string text = serialize_checkpoint(store);
  EXPECT_EQ(text.rfind("REVISE-CKPT-1\n", 0), 0u);
  ParamStore back = parse_checkpoint(text);
  EXPECT_TRUE(back == store);
  EXPECT_EQ(serialize_checkpoint(back), text);
}

TEST(NumcoreCheckpoint, RejectsWrongMagic) {
  EXPECT_THROW(parse_checkpoint("REVISE-CKPT-0\nseed 1\n"), ValidationError);
}

}  // namespace
}  // namespace revise::num
