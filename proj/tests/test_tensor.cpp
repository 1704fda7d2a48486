// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "ngt/rng.hpp"
#include "ngt/tensor.hpp"

using ngt::Tensor;

namespace {

Tensor randn(std::vector<int64_t> shape, uint64_t seed, const char* tag) {
  ngt::Rng rng = ngt::Rng::stream(seed, tag);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.normal(0.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("tensor construction and shape helpers") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.numel() == 6);
  CHECK(z.rank() == 2);
  CHECK(z.dim(1) == 3);
  CHECK(ngt::shape_str(z.shape) == "[2, 3]");

  Tensor f = Tensor::full({2}, 4.5);
  CHECK(f.data == std::vector<double>{4.5, 4.5});

  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor::zeros({-1}), std::invalid_argument);
}

TEST_CASE("matmul small known products") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = ngt::matmul(a, b);
  CHECK(c.shape == std::vector<int64_t>{2, 2});
  CHECK(c.data == std::vector<double>{58, 64, 139, 154});

  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor m = randn({3, 3}, 1, "t");
  CHECK(ngt::matmul(eye, m).data == m.data);
  CHECK(ngt::matmul(m, eye).data == m.data);

  CHECK_THROWS_AS(ngt::matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(ngt::matmul(a, Tensor::zeros({3})), std::invalid_argument);
}

TEST_CASE("bmm equals per-group matmul") {
  Tensor a = randn({4, 3, 5}, 2, "bmm.a");
  Tensor b = randn({4, 5, 2}, 2, "bmm.b");
  Tensor c = ngt::bmm(a, b);
  CHECK(c.shape == std::vector<int64_t>{4, 3, 2});
  for (int64_t g = 0; g < 4; ++g) {
    Tensor ag = ngt::slice(a, 0, g, 1);
    Tensor bg = ngt::slice(b, 0, g, 1);
    Tensor expect = ngt::matmul(ngt::reshape(ag, {3, 5}), ngt::reshape(bg, {5, 2}));
    Tensor got = ngt::reshape(ngt::slice(c, 0, g, 1), {3, 2});
    CHECK(got.data == expect.data);
  }
  CHECK_THROWS_AS(ngt::bmm(a, a), std::invalid_argument);
}

TEST_CASE("elementwise add, hadamard, scale, add_bias") {
  Tensor a({3}, {1, 2, 3});
  Tensor b({3}, {10, 20, 30});
  CHECK(ngt::add(a, b).data == std::vector<double>{11, 22, 33});

  Tensor h = ngt::hadamard(Tensor({2}, {2, 3}), Tensor({2}, {0.5, 0.5}));
  CHECK(h.data == std::vector<double>{1.0, 1.5});

  CHECK(ngt::scale(a, -2.0).data == std::vector<double>{-2, -4, -6});

  Tensor x({2, 3}, {0, 0, 0, 1, 1, 1});
  Tensor bias({3}, {1, 2, 3});
  CHECK(ngt::add_bias(x, bias).data == std::vector<double>{1, 2, 3, 2, 3, 4});

  CHECK_THROWS_AS(ngt::add(a, x), std::invalid_argument);
  CHECK_THROWS_AS(ngt::hadamard(a, x), std::invalid_argument);
  CHECK_THROWS_AS(ngt::add_bias(x, Tensor::zeros({2})), std::invalid_argument);
}

TEST_CASE("sigmoid fixed points") {
  Tensor x({4}, {0.0, 40.0, -40.0, std::log(3.0)});
  Tensor y = ngt::sigmoid(x);
  CHECK(y.data[0] == 0.5);
  CHECK(y.data[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(y.data[2] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(y.data[3] == doctest::Approx(0.75).epsilon(1e-12));
  // Large magnitudes stay finite.
  Tensor big = ngt::sigmoid(Tensor({2}, {800.0, -800.0}));
  CHECK(std::isfinite(big.data[0]));
  CHECK(std::isfinite(big.data[1]));
}

TEST_CASE("tanh and gelu fixed points") {
  CHECK(ngt::tanh(Tensor({1}, {0.0})).data[0] == 0.0);
  CHECK(ngt::tanh(Tensor({1}, {1.0})).data[0] == doctest::Approx(0.7615941559557649).epsilon(1e-14));

  Tensor g = ngt::gelu(Tensor({4}, {0.0, 1.0, 10.0, -10.0}));
  CHECK(g.data[0] == 0.0);
  CHECK(g.data[1] == doctest::Approx(0.8413447460685429).epsilon(1e-13));
  CHECK(g.data[2] == doctest::Approx(10.0).epsilon(1e-13));
  CHECK(g.data[3] == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("softmax rows") {
  Tensor c = ngt::softmax(Tensor({3}, {2.5, 2.5, 2.5}), 0);
  for (double v : c.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Tensor big = ngt::softmax(Tensor({2}, {1000.0, 1000.0}), 0);
  CHECK(big.data[0] == 0.5);
  CHECK(big.data[1] == 0.5);

  Tensor q = ngt::softmax(Tensor({2}, {0.0, std::log(3.0)}), 0);
  CHECK(q.data[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(q.data[1] == doctest::Approx(0.75).epsilon(1e-12));

  // Axis other than the last.
  Tensor m({2, 2}, {0.0, 1.0, std::log(3.0), 1.0});
  Tensor s0 = ngt::softmax(m, 0);
  CHECK(s0.data[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s0.data[2] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(s0.data[1] == doctest::Approx(0.5).epsilon(1e-12));

  // Rows sum to one on random input.
  Tensor r = randn({5, 7}, 3, "sm");
  Tensor sr = ngt::softmax(r, 1);
  for (int64_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < 7; ++j) s += sr.data[static_cast<size_t>(i * 7 + j)];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(ngt::softmax(r, 2), std::invalid_argument);
}

TEST_CASE("layer_norm rows") {
  Tensor gamma = Tensor::ones({2});
  Tensor beta({2}, {5.0, -5.0});

  // Zero variance collapses to beta.
  Tensor flat = ngt::layer_norm(Tensor({2}, {3.0, 3.0}), gamma, beta, 1e-12);
  CHECK(flat.data[0] == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(flat.data[1] == doctest::Approx(-5.0).epsilon(1e-6));

  // Mean 0, biased variance 1: output is the input (up to eps).
  Tensor unit = ngt::layer_norm(Tensor({2}, {-1.0, 1.0}), gamma, Tensor::zeros({2}), 1e-12);
  CHECK(unit.data[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(unit.data[1] == doctest::Approx(1.0).epsilon(1e-9));

  // Shift invariance.
  Tensor x = randn({4, 16}, 4, "ln");
  Tensor g16 = Tensor::ones({16});
  Tensor b16 = Tensor::zeros({16});
  Tensor shifted = ngt::add(x, Tensor::full({4, 16}, 3.0));
  Tensor y0 = ngt::layer_norm(x, g16, b16, 1e-12);
  Tensor y1 = ngt::layer_norm(shifted, g16, b16, 1e-12);
  for (size_t i = 0; i < y0.data.size(); ++i) {
    CHECK(y0.data[i] == doctest::Approx(y1.data[i]).epsilon(1e-10));
  }

  CHECK_THROWS_AS(ngt::layer_norm(x, gamma, b16, 1e-12), std::invalid_argument);
  CHECK_THROWS_AS(ngt::layer_norm(x, g16, b16, 0.0), std::invalid_argument);
}

TEST_CASE("transpose, permute, reshape") {
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = ngt::transpose2d(a);
  CHECK(t.shape == std::vector<int64_t>{3, 2});
  CHECK(t.data == std::vector<double>{1, 4, 2, 5, 3, 6});
  CHECK(ngt::transpose2d(t).data == a.data);

  Tensor p = randn({2, 3, 4, 5}, 5, "perm");
  Tensor q = ngt::permute(p, {2, 0, 3, 1});
  CHECK(q.shape == std::vector<int64_t>{4, 2, 5, 3});
  Tensor back = ngt::permute(q, {1, 3, 0, 2});  // inverse of {2,0,3,1}
  CHECK(back.data == p.data);

  // permute {1, 0} matches transpose2d.
  CHECK(ngt::permute(a, {1, 0}).data == t.data);
  CHECK_THROWS_AS(ngt::permute(a, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(ngt::permute(a, {0}), std::invalid_argument);

  Tensor r = ngt::reshape(a, {3, 2});
  CHECK(r.data == a.data);
  CHECK_THROWS_AS(ngt::reshape(a, {4, 2}), std::invalid_argument);
}

TEST_CASE("slice and concat") {
  Tensor a({2, 4}, {0, 1, 2, 3, 10, 11, 12, 13});
  Tensor s = ngt::slice(a, 1, 1, 2);
  CHECK(s.shape == std::vector<int64_t>{2, 2});
  CHECK(s.data == std::vector<double>{1, 2, 11, 12});

  Tensor s0 = ngt::slice(a, 0, 1, 1);
  CHECK(s0.data == std::vector<double>{10, 11, 12, 13});

  Tensor c = ngt::concat(ngt::slice(a, 1, 0, 1), ngt::slice(a, 1, 1, 3), 1);
  CHECK(c.data == a.data);

  Tensor c0 = ngt::concat(ngt::slice(a, 0, 0, 1), ngt::slice(a, 0, 1, 1), 0);
  CHECK(c0.data == a.data);

  CHECK_THROWS_AS(ngt::slice(a, 1, 3, 2), std::invalid_argument);
  CHECK_THROWS_AS(ngt::concat(a, Tensor::zeros({2, 3}), 0), std::invalid_argument);
}

TEST_CASE("gather_rows") {
  Tensor table({3, 2}, {0, 1, 10, 11, 20, 21});
  Tensor g = ngt::gather_rows(table, {2, 0, 2});
  CHECK(g.shape == std::vector<int64_t>{3, 2});
  CHECK(g.data == std::vector<double>{20, 21, 0, 1, 20, 21});
  CHECK_THROWS_AS(ngt::gather_rows(table, {3}), std::invalid_argument);
  CHECK_THROWS_AS(ngt::gather_rows(table, {-1}), std::invalid_argument);
}

TEST_CASE("sum, mean, argmax") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  CHECK(ngt::sum(a) == 10.0);
  CHECK(ngt::mean(a) == 2.5);

  Tensor m({2, 3}, {1, 5, 5, 7, 2, 7});
  auto rows = ngt::argmax(m, 1);
  CHECK(rows == std::vector<int64_t>{1, 0});  // ties take the lowest index
  auto cols = ngt::argmax(m, 0);
  CHECK(cols == std::vector<int64_t>{1, 0, 1});
}

TEST_CASE("dropout") {
  Tensor x = randn({4, 8}, 6, "do");

  ngt::Rng r0 = ngt::Rng::stream(9, "dropout");
  Tensor same = ngt::dropout(x, 0.5, false, r0);
  CHECK(same.data == x.data);
  // Eval mode consumed no draws.
  ngt::Rng fresh = ngt::Rng::stream(9, "dropout");
  CHECK(r0.u64() == fresh.u64());

  ngt::Rng r1 = ngt::Rng::stream(9, "dropout");
  Tensor zero_rate = ngt::dropout(x, 0.0, true, r1);
  CHECK(zero_rate.data == x.data);

  ngt::Rng r2 = ngt::Rng::stream(9, "dropout");
  Tensor dropped = ngt::dropout(x, 0.5, true, r2);
  int zeros = 0;
  for (size_t i = 0; i < dropped.data.size(); ++i) {
    bool is_zero = dropped.data[i] == 0.0;
    bool is_scaled = dropped.data[i] == 2.0 * x.data[i];
    CHECK((is_zero || is_scaled));
    zeros += is_zero ? 1 : 0;
  }
  CHECK(zeros > 0);
  CHECK(zeros < 32);

  // Same stream, same mask.
  ngt::Rng r3 = ngt::Rng::stream(9, "dropout");
  CHECK(ngt::dropout(x, 0.5, true, r3).data == dropped.data);

  // Mask expectation is ~1 under inverted scaling.
  ngt::Rng r4 = ngt::Rng::stream(10, "dropout");
  Tensor mask = ngt::dropout_mask({200, 200}, 0.1, r4);
  CHECK(ngt::mean(mask) == doctest::Approx(1.0).epsilon(0.01));

  CHECK_THROWS_AS(ngt::dropout(x, 1.0, true, r4), std::invalid_argument);
  CHECK_THROWS_AS(ngt::dropout(x, -0.1, true, r4), std::invalid_argument);
}

TEST_CASE("parallel kernels match the serial reference bitwise") {
  // Force the parallel path regardless of size.
  ngt::set_parallel_min_work(1);
  ngt::set_parallel_enabled(true);

  Tensor a = randn({33, 47}, 11, "p.a");
  Tensor b = randn({47, 29}, 11, "p.b");
  CHECK(ngt::matmul(a, b).data == ngt::ref::matmul(a, b).data);

  Tensor ba = randn({5, 9, 13}, 12, "p.ba");
  Tensor bb = randn({5, 13, 7}, 12, "p.bb");
  CHECK(ngt::bmm(ba, bb).data == ngt::ref::bmm(ba, bb).data);

  Tensor x = randn({31, 64}, 13, "p.x");
  Tensor y = randn({31, 64}, 14, "p.y");
  CHECK(ngt::add(x, y).data == ngt::ref::add(x, y).data);
  CHECK(ngt::hadamard(x, y).data == ngt::ref::hadamard(x, y).data);
  CHECK(ngt::scale(x, 1.7).data == ngt::ref::scale(x, 1.7).data);
  CHECK(ngt::sigmoid(x).data == ngt::ref::sigmoid(x).data);
  CHECK(ngt::tanh(x).data == ngt::ref::tanh(x).data);
  CHECK(ngt::gelu(x).data == ngt::ref::gelu(x).data);
  CHECK(ngt::softmax(x, 1).data == ngt::ref::softmax(x, 1).data);
  CHECK(ngt::softmax(x, 0).data == ngt::ref::softmax(x, 0).data);

  Tensor bias = randn({64}, 15, "p.bias");
  CHECK(ngt::add_bias(x, bias).data == ngt::ref::add_bias(x, bias).data);

  Tensor gamma = randn({64}, 16, "p.g");
  Tensor beta = randn({64}, 17, "p.be");
  CHECK(ngt::layer_norm(x, gamma, beta, 1e-12).data ==
        ngt::ref::layer_norm(x, gamma, beta, 1e-12).data);

  // Disabled switch routes to the reference.
  ngt::set_parallel_enabled(false);
  CHECK(ngt::matmul(a, b).data == ngt::ref::matmul(a, b).data);

  ngt::set_parallel_enabled(true);
  ngt::set_parallel_min_work(16384);
}
