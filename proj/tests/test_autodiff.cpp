// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ngt/autodiff.hpp"
#include "ngt/rng.hpp"
#include "ngt/tensor.hpp"

using ngt::Tensor;
using ngt::ad::Graph;
using ngt::ad::GradCheckOptions;
using ngt::ad::NodeId;

namespace {

Tensor randn(std::vector<int64_t> shape, uint64_t seed, const char* tag) {
  ngt::Rng rng = ngt::Rng::stream(seed, tag);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.normal(0.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("backward on sum of squares") {
  Graph g;
  NodeId w = g.leaf(Tensor({1}, {3.0}), "w");
  NodeId loss = g.sum_all(g.hadamard(w, w));
  auto grads = g.backward(loss);
  REQUIRE(grads.count("w") == 1);
  CHECK(grads.at("w").data[0] == 6.0);
}

TEST_CASE("backward through sigmoid at zero") {
  Graph g;
  NodeId w = g.leaf(Tensor({1}, {0.0}), "w");
  NodeId loss = g.sigmoid(w);
  auto grads = g.backward(loss);
  CHECK(grads.at("w").data[0] == 0.25);
}

TEST_CASE("backward rejects non-scalar loss") {
  Graph g;
  NodeId w = g.leaf(Tensor({3}, {1, 2, 3}), "w");
  NodeId y = g.hadamard(w, w);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("unreachable parameters get no gradient entry") {
  Graph g;
  NodeId used = g.leaf(Tensor({2}, {1.0, 2.0}), "used");
  g.leaf(Tensor({2}, {5.0, 5.0}), "idle");
  NodeId loss = g.sum_all(used);
  auto grads = g.backward(loss);
  CHECK(grads.count("used") == 1);
  CHECK(grads.count("idle") == 0);
}

TEST_CASE("hadamard gate gradients are exact") {
  Tensor gate = randn({4, 5}, 1, "gate");
  Tensor x = randn({4, 5}, 2, "x");
  Graph g;
  NodeId gn = g.leaf(gate, "gate");
  NodeId xn = g.leaf(x, "x");
  NodeId loss = g.sum_all(g.hadamard(gn, xn));
  auto grads = g.backward(loss);
  CHECK(grads.at("x").data == gate.data);
  CHECK(grads.at("gate").data == x.data);
}

TEST_CASE("gradient accumulates when a parameter is used twice") {
  // loss = sum(w ⊙ w) + sum(w): grad = 2w + 1.
  Graph g;
  NodeId w = g.leaf(Tensor({3}, {1.0, -2.0, 0.5}), "w");
  NodeId loss = g.add(g.sum_all(g.hadamard(w, w)), g.sum_all(w));
  auto grads = g.backward(loss);
  CHECK(grads.at("w").data == std::vector<double>{3.0, -3.0, 2.0});
}

TEST_CASE("linearity of gradients") {
  Tensor w0 = randn({6}, 3, "lin");
  double a = 1.7, b = -0.4;

  auto grad_of = [&](bool combined) {
    Graph g;
    NodeId w = g.leaf(w0, "w");
    NodeId l1 = g.sum_all(g.hadamard(w, w));
    NodeId l2 = g.sum_all(g.sigmoid(w));
    if (combined) {
      return g.backward(g.add(g.scale(l1, a), g.scale(l2, b))).at("w");
    }
    Tensor g1 = g.backward(l1).at("w");
    Tensor g2 = g.backward(l2).at("w");
    Tensor out = ngt::add(ngt::scale(g1, a), ngt::scale(g2, b));
    return out;
  };

  Tensor combined = grad_of(true);
  Tensor separate = grad_of(false);
  for (size_t i = 0; i < combined.data.size(); ++i) {
    CHECK(combined.data[i] == doctest::Approx(separate.data[i]).epsilon(1e-10));
  }
}

TEST_CASE("finite difference oracle basics") {
  Tensor x = randn({7}, 4, "fd");
  Tensor ones = ngt::ad::finite_diff_grad([](const Tensor& t) { return ngt::sum(t); }, x);
  for (double v : ones.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  Tensor x3({1}, {3.0});
  Tensor d = ngt::ad::finite_diff_grad(
      [](const Tensor& t) { return t.data[0] * t.data[0]; }, x3, 1e-5);
  CHECK(d.data[0] == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("linear graph checks at 1e-10") {
  Graph g;
  NodeId a = g.leaf(randn({2, 3}, 5, "lg.a"), "a");
  NodeId b = g.leaf(randn({3, 2}, 5, "lg.b"), "b");
  NodeId loss = g.sum_all(g.matmul(a, b));
  GradCheckOptions opts;
  auto report = ngt::ad::grad_check(g, loss, opts);
  CHECK(report.pass);
  CHECK(report.max_rel_err <= 1e-10);
}

TEST_CASE("grad_check covers every op kind used downstream") {
  GradCheckOptions opts;

  SUBCASE("matmul chain with bias and gelu") {
    Graph g;
    NodeId x = g.constant(randn({4, 3}, 6, "c.x"));
    NodeId w1 = g.leaf(randn({3, 5}, 6, "c.w1"), "w1");
    NodeId b1 = g.leaf(randn({5}, 6, "c.b1"), "b1");
    NodeId w2 = g.leaf(randn({5, 2}, 6, "c.w2"), "w2");
    NodeId h = g.gelu(g.add_bias(g.matmul(x, w1), b1));
    NodeId loss = g.mean_all(g.matmul(h, w2));
    auto r = ngt::ad::grad_check(g, loss, opts);
    INFO(r.worst_param, " coord ", r.worst_coord, " a=", r.analytic_at_worst, " n=",
         r.numeric_at_worst);
    CHECK(r.pass);
  }

  SUBCASE("bmm with permute and reshape") {
    Graph g;
    NodeId a = g.leaf(randn({3, 2, 4}, 7, "b.a"), "a");
    NodeId b = g.leaf(randn({3, 4, 2}, 7, "b.b"), "b");
    NodeId y = g.bmm(a, b);                       // [3,2,2]
    NodeId p = g.permute(y, {1, 0, 2});           // [2,3,2]
    NodeId r2 = g.reshape(p, {6, 2});
    NodeId loss = g.sum_all(g.tanh(r2));
    auto r = ngt::ad::grad_check(g, loss, opts);
    CHECK(r.pass);
  }

  SUBCASE("layer_norm, softmax, sigmoid, scale, slice") {
    Graph g;
    NodeId x = g.leaf(randn({3, 6}, 8, "s.x"), "x");
    NodeId gamma = g.leaf(randn({6}, 8, "s.g"), "gamma");
    NodeId beta = g.leaf(randn({6}, 8, "s.b"), "beta");
    NodeId ln = g.layer_norm(x, gamma, beta, 1e-5);
    NodeId sm = g.softmax_last(g.scale(ln, 1.3));
    NodeId sl = g.slice(sm, 1, 1, 3);
    NodeId loss = g.mean_all(g.sigmoid(sl));
    auto r = ngt::ad::grad_check(g, loss, opts);
    INFO(r.worst_param, " rel ", r.max_rel_err);
    CHECK(r.pass);
  }

  SUBCASE("gather_rows scatter-add with repeated index") {
    Graph g;
    NodeId table = g.leaf(randn({5, 3}, 9, "g.t"), "table");
    NodeId rows = g.gather_rows(table, {4, 0, 4, 2});
    NodeId loss = g.sum_all(g.hadamard(rows, rows));
    auto r = ngt::ad::grad_check(g, loss, opts);
    CHECK(r.pass);
  }

  SUBCASE("bce with logits") {
    Graph g;
    NodeId z = g.leaf(randn({6, 1}, 10, "bce.z"), "z");
    Tensor t = Tensor::zeros({6, 1});
    t.data = {1, 0, 1, 1, 0, 1};
    NodeId loss = g.bce_with_logits(z, t);
    auto r = ngt::ad::grad_check(g, loss, opts);
    CHECK(r.pass);
  }

  SUBCASE("softmax cross-entropy") {
    Graph g;
    NodeId z = g.leaf(randn({5, 3}, 11, "xe.z"), "z");
    NodeId loss = g.softmax_xent(z, {0, 2, 1, 2, 0});
    auto r = ngt::ad::grad_check(g, loss, opts);
    CHECK(r.pass);
  }

  SUBCASE("dropout with frozen mask") {
    ngt::Rng rng = ngt::Rng::stream(12, "dropout");
    Graph g;
    NodeId x = g.leaf(randn({4, 8}, 12, "d.x"), "x");
    NodeId y = g.dropout(x, 0.25, true, rng);
    NodeId loss = g.mean_all(g.hadamard(y, y));
    auto r = ngt::ad::grad_check(g, loss, opts);
    CHECK(r.pass);

    GradCheckOptions loose = opts;
    loose.freeze_dropout_masks = false;
    CHECK_THROWS_AS(ngt::ad::grad_check(g, loss, loose), std::invalid_argument);
  }
}

TEST_CASE("bce matches the closed form at simple points") {
  // z = 0 → loss = log 2 regardless of target.
  Graph g;
  NodeId z = g.leaf(Tensor({2, 1}, {0.0, 0.0}), "z");
  Tensor t({2, 1}, {1.0, 0.0});
  NodeId loss = g.bce_with_logits(z, t);
  CHECK(g.value(loss).data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  auto grads = g.backward(loss);
  // d/dz mean BCE at z=0: (σ(0) − t)/2 = (0.5 − t)/2.
  CHECK(grads.at("z").data[0] == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(grads.at("z").data[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax_xent matches uniform logits closed form") {
  Graph g;
  NodeId z = g.leaf(Tensor::zeros({2, 4}), "z");
  NodeId loss = g.softmax_xent(z, {1, 3});
  CHECK(g.value(loss).data[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("recompute refreshes downstream values after set_leaf") {
  Graph g;
  NodeId w = g.leaf(Tensor({2}, {1.0, 2.0}), "w");
  NodeId loss = g.sum_all(g.hadamard(w, w));
  CHECK(g.value(loss).data[0] == 5.0);

  g.set_leaf(w, Tensor({2}, {3.0, 4.0}));
  g.recompute();
  CHECK(g.value(loss).data[0] == 25.0);

  CHECK_THROWS_AS(g.set_leaf(w, Tensor({3}, {1, 2, 3})), std::invalid_argument);
  CHECK_THROWS_AS(g.set_leaf(loss, Tensor({1}, {0.0})), std::invalid_argument);
}

TEST_CASE("softmax_xent and bce input validation") {
  Graph g;
  NodeId z2 = g.leaf(randn({2, 3}, 13, "v.z"), "z");
  CHECK_THROWS_AS(g.softmax_xent(z2, {0}), std::invalid_argument);
  CHECK_THROWS_AS(g.softmax_xent(z2, {0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(g.bce_with_logits(z2, Tensor::zeros({2, 1})), std::invalid_argument);
  CHECK_THROWS_AS(g.bce_with_logits(z2, Tensor::full({2, 3}, 1.5)), std::invalid_argument);
}
