// SPDX-License-Identifier: Apache-2.0

#include "ngt/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "ngt/rng.hpp"

namespace ngt {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

std::atomic<bool> g_parallel{true};
std::atomic<int64_t> g_min_work{16384};

bool run_parallel(int64_t work) {
  return g_parallel.load(std::memory_order_relaxed) &&
         work >= g_min_work.load(std::memory_order_relaxed);
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  require(shape_numel(shape) == static_cast<int64_t>(data.size()),
          "tensor data length " + std::to_string(data.size()) +
              " does not match shape " + shape_str(shape));
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
  int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::ones(std::vector<int64_t> shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), value));
}

Tensor Tensor::row(std::vector<double> values) {
  int64_t n = static_cast<int64_t>(values.size());
  return Tensor({n}, std::move(values));
}

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    require(d > 0, "shape dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_min_work(int64_t work) { g_min_work.store(work, std::memory_order_relaxed); }
int64_t parallel_min_work() { return g_min_work.load(std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// Shared shape checks.
// ---------------------------------------------------------------------------

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " +
                               shape_str(a.shape) + " vs " + shape_str(b.shape));
}

void check_matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2,
          "matmul: expects rank-2 operands, got " + shape_str(a.shape) + " and " +
              shape_str(b.shape));
  require(a.shape[1] == b.shape[0], "matmul: inner dimensions disagree, " +
                                        shape_str(a.shape) + " x " + shape_str(b.shape));
}

void check_bmm(const Tensor& a, const Tensor& b) {
  require(a.rank() == 3 && b.rank() == 3,
          "bmm: expects rank-3 operands, got " + shape_str(a.shape) + " and " +
              shape_str(b.shape));
  require(a.shape[0] == b.shape[0] && a.shape[2] == b.shape[1],
          "bmm: incompatible shapes " + shape_str(a.shape) + " x " + shape_str(b.shape));
}

void check_bias(const Tensor& x, const Tensor& bias) {
  require(x.rank() >= 1 && bias.rank() == 1 && bias.shape[0] == x.shape.back(),
          "add_bias: bias " + shape_str(bias.shape) + " does not match last axis of " +
              shape_str(x.shape));
}

void check_layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  require(x.rank() >= 1, "layer_norm: rank-0 input");
  int64_t c = x.shape.back();
  require(gamma.rank() == 1 && gamma.shape[0] == c && beta.rank() == 1 &&
              beta.shape[0] == c,
          "layer_norm: gamma " + shape_str(gamma.shape) + " / beta " +
              shape_str(beta.shape) + " do not match last axis of " + shape_str(x.shape));
}

void check_axis(const Tensor& x, int axis, const char* op) {
  require(axis >= 0 && axis < x.rank(), std::string(op) + ": axis " +
                                            std::to_string(axis) + " out of range for " +
                                            shape_str(x.shape));
}

// Row of matmul output: fixed ascending-k accumulation order. Both the
// reference and the OpenMP kernels go through this, which is what makes them
// bit-identical.
inline void matmul_row(const double* a, const double* b, double* out, int64_t K,
                       int64_t N) {
  for (int64_t j = 0; j < N; ++j) out[j] = 0.0;
  for (int64_t k = 0; k < K; ++k) {
    double aik = a[k];
    const double* brow = b + k * N;
    for (int64_t j = 0; j < N; ++j) out[j] += aik * brow[j];
  }
}

inline double sigmoid1(double x) {
  // Split form never overflows.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double gelu1(double x) {
  return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244));
}

// One softmax slice with max subtraction.
inline void softmax_slice(const double* x, double* out, int64_t n, int64_t stride) {
  double m = x[0];
  for (int64_t i = 1; i < n; ++i) m = std::max(m, x[i * stride]);
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double e = std::exp(x[i * stride] - m);
    out[i * stride] = e;
    s += e;
  }
  for (int64_t i = 0; i < n; ++i) out[i * stride] /= s;
}

// One layer_norm row: biased variance, (x-mean)/sqrt(var+eps)*gamma + beta.
inline void layer_norm_row(const double* x, const double* gamma, const double* beta,
                           double* out, int64_t c, double eps) {
  double m = 0.0;
  for (int64_t j = 0; j < c; ++j) m += x[j];
  m /= static_cast<double>(c);
  double v = 0.0;
  for (int64_t j = 0; j < c; ++j) {
    double d = x[j] - m;
    v += d * d;
  }
  v /= static_cast<double>(c);
  double inv = 1.0 / std::sqrt(v + eps);
  for (int64_t j = 0; j < c; ++j) out[j] = (x[j] - m) * inv * gamma[j] + beta[j];
}

}  // namespace

// ---------------------------------------------------------------------------
// Serial reference kernels.
// ---------------------------------------------------------------------------

namespace ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matmul(a, b);
  int64_t M = a.shape[0], K = a.shape[1], N = b.shape[1];
  Tensor out = Tensor::zeros({M, N});
  for (int64_t i = 0; i < M; ++i) {
    matmul_row(a.data.data() + i * K, b.data.data(), out.data.data() + i * N, K, N);
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  check_bmm(a, b);
  int64_t G = a.shape[0], M = a.shape[1], K = a.shape[2], N = b.shape[2];
  Tensor out = Tensor::zeros({G, M, N});
  for (int64_t g = 0; g < G; ++g) {
    for (int64_t i = 0; i < M; ++i) {
      matmul_row(a.data.data() + (g * M + i) * K, b.data.data() + g * K * N,
                 out.data.data() + (g * M + i) * N, K, N);
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  check_bias(x, bias);
  int64_t c = x.shape.back();
  int64_t rows = x.numel() / c;
  Tensor out = x;
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data.data() + r * c;
    for (int64_t j = 0; j < c; ++j) row[j] += bias.data[static_cast<size_t>(j)];
  }
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor scale(const Tensor& x, double c) {
  Tensor out = x;
  for (double& v : out.data) v *= c;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = sigmoid1(v);
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = std::tanh(v);
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = gelu1(v);
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  check_axis(x, axis, "softmax");
  int64_t n = x.shape[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];
  int64_t outer = x.numel() / (n * inner);
  Tensor out = Tensor::zeros(x.shape);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      int64_t base = o * n * inner + in;
      softmax_slice(x.data.data() + base, out.data.data() + base, n, inner);
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  check_layer_norm(x, gamma, beta);
  require(eps > 0.0, "layer_norm: eps must be positive");
  int64_t c = x.shape.back();
  int64_t rows = x.numel() / c;
  Tensor out = Tensor::zeros(x.shape);
  for (int64_t r = 0; r < rows; ++r) {
    layer_norm_row(x.data.data() + r * c, gamma.data.data(), beta.data.data(),
                   out.data.data() + r * c, c, eps);
  }
  return out;
}

}  // namespace ref

// ---------------------------------------------------------------------------
// OpenMP kernels. Work splits across output slices; each slice is computed
// exactly as in the reference.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matmul(a, b);
  int64_t M = a.shape[0], K = a.shape[1], N = b.shape[1];
  if (!run_parallel(M * N * K)) return ref::matmul(a, b);
  Tensor out = Tensor::zeros({M, N});
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < M; ++i) {
    matmul_row(a.data.data() + i * K, b.data.data(), out.data.data() + i * N, K, N);
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  check_bmm(a, b);
  int64_t G = a.shape[0], M = a.shape[1], K = a.shape[2], N = b.shape[2];
  if (!run_parallel(G * M * N * K)) return ref::bmm(a, b);
  Tensor out = Tensor::zeros({G, M, N});
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t g = 0; g < G; ++g) {
    for (int64_t i = 0; i < M; ++i) {
      matmul_row(a.data.data() + (g * M + i) * K, b.data.data() + g * K * N,
                 out.data.data() + (g * M + i) * N, K, N);
    }
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  int64_t n = a.numel();
  if (!run_parallel(n)) return ref::add(a, b);
  Tensor out = a;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] += b.data[static_cast<size_t>(i)];
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  check_bias(x, bias);
  int64_t c = x.shape.back();
  int64_t rows = x.numel() / c;
  if (!run_parallel(x.numel())) return ref::add_bias(x, bias);
  Tensor out = x;
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data.data() + r * c;
    for (int64_t j = 0; j < c; ++j) row[j] += bias.data[static_cast<size_t>(j)];
  }
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  int64_t n = a.numel();
  if (!run_parallel(n)) return ref::hadamard(a, b);
  Tensor out = a;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] *= b.data[static_cast<size_t>(i)];
  return out;
}

Tensor scale(const Tensor& x, double c) {
  int64_t n = x.numel();
  if (!run_parallel(n)) return ref::scale(x, c);
  Tensor out = x;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] *= c;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  int64_t n = x.numel();
  if (!run_parallel(n * 8)) return ref::sigmoid(x);  // exp is ~8x a flop
  Tensor out = x;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = sigmoid1(x.data[static_cast<size_t>(i)]);
  return out;
}

Tensor tanh(const Tensor& x) {
  int64_t n = x.numel();
  if (!run_parallel(n * 8)) return ref::tanh(x);
  Tensor out = x;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = std::tanh(x.data[static_cast<size_t>(i)]);
  return out;
}

Tensor gelu(const Tensor& x) {
  int64_t n = x.numel();
  if (!run_parallel(n * 8)) return ref::gelu(x);
  Tensor out = x;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out.data[static_cast<size_t>(i)] = gelu1(x.data[static_cast<size_t>(i)]);
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  check_axis(x, axis, "softmax");
  int64_t n = x.shape[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];
  int64_t outer = x.numel() / (n * inner);
  if (!run_parallel(x.numel() * 4) || outer == 1) return ref::softmax(x, axis);
  Tensor out = Tensor::zeros(x.shape);
#pragma omp parallel for schedule(static)
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      int64_t base = o * n * inner + in;
      softmax_slice(x.data.data() + base, out.data.data() + base, n, inner);
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  check_layer_norm(x, gamma, beta);
  require(eps > 0.0, "layer_norm: eps must be positive");
  int64_t c = x.shape.back();
  int64_t rows = x.numel() / c;
  if (!run_parallel(x.numel() * 3) || rows == 1) return ref::layer_norm(x, gamma, beta, eps);
  Tensor out = Tensor::zeros(x.shape);
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    layer_norm_row(x.data.data() + r * c, gamma.data.data(), beta.data.data(),
                   out.data.data() + r * c, c, eps);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layout and reduction ops.
// ---------------------------------------------------------------------------

Tensor transpose2d(const Tensor& x) {
  require(x.rank() == 2, "transpose2d: expects rank-2, got " + shape_str(x.shape));
  int64_t M = x.shape[0], N = x.shape[1];
  Tensor out = Tensor::zeros({N, M});
  for (int64_t i = 0; i < M; ++i)
    for (int64_t j = 0; j < N; ++j) out.data[static_cast<size_t>(j * M + i)] = x.data[static_cast<size_t>(i * N + j)];
  return out;
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  int r = x.rank();
  require(static_cast<int>(axes.size()) == r,
          "permute: axes " + std::to_string(axes.size()) + " entries for rank " +
              std::to_string(r));
  std::vector<bool> seen(static_cast<size_t>(r), false);
  for (int a : axes) {
    require(a >= 0 && a < r && !seen[static_cast<size_t>(a)], "permute: invalid axes for " + shape_str(x.shape));
    seen[static_cast<size_t>(a)] = true;
  }
  std::vector<int64_t> out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = x.shape[static_cast<size_t>(axes[static_cast<size_t>(i)])];
  Tensor out = Tensor::zeros(out_shape);

  std::vector<int64_t> in_stride(static_cast<size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i) in_stride[static_cast<size_t>(i)] = in_stride[static_cast<size_t>(i + 1)] * x.shape[static_cast<size_t>(i + 1)];

  std::vector<int64_t> idx(static_cast<size_t>(r), 0);
  int64_t n = x.numel();
  for (int64_t flat = 0; flat < n; ++flat) {
    int64_t src = 0;
    for (int i = 0; i < r; ++i) src += idx[static_cast<size_t>(i)] * in_stride[static_cast<size_t>(axes[static_cast<size_t>(i)])];
    out.data[static_cast<size_t>(flat)] = x.data[static_cast<size_t>(src)];
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < out_shape[static_cast<size_t>(i)]) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int64_t> new_shape) {
  require(shape_numel(new_shape) == x.numel(),
          "reshape: cannot view " + shape_str(x.shape) + " as " + shape_str(new_shape));
  return Tensor(std::move(new_shape), x.data);
}

Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len) {
  check_axis(x, axis, "slice");
  int64_t n = x.shape[static_cast<size_t>(axis)];
  require(start >= 0 && len > 0 && start + len <= n,
          "slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
              ") out of bounds for axis " + std::to_string(axis) + " of " + shape_str(x.shape));
  int64_t inner = 1;
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];
  int64_t outer = x.numel() / (n * inner);
  std::vector<int64_t> out_shape = x.shape;
  out_shape[static_cast<size_t>(axis)] = len;
  Tensor out = Tensor::zeros(out_shape);
  for (int64_t o = 0; o < outer; ++o) {
    const double* src = x.data.data() + (o * n + start) * inner;
    double* dst = out.data.data() + o * len * inner;
    std::memcpy(dst, src, static_cast<size_t>(len * inner) * sizeof(double));
  }
  return out;
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
  check_axis(a, axis, "concat");
  require(a.rank() == b.rank(), "concat: rank mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  for (int i = 0; i < a.rank(); ++i) {
    if (i == axis) continue;
    require(a.shape[static_cast<size_t>(i)] == b.shape[static_cast<size_t>(i)],
            "concat: shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) +
                " differ off axis " + std::to_string(axis));
  }
  int64_t na = a.shape[static_cast<size_t>(axis)], nb = b.shape[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (int i = axis + 1; i < a.rank(); ++i) inner *= a.shape[static_cast<size_t>(i)];
  int64_t outer = a.numel() / (na * inner);
  std::vector<int64_t> out_shape = a.shape;
  out_shape[static_cast<size_t>(axis)] = na + nb;
  Tensor out = Tensor::zeros(out_shape);
  for (int64_t o = 0; o < outer; ++o) {
    std::memcpy(out.data.data() + o * (na + nb) * inner, a.data.data() + o * na * inner,
                static_cast<size_t>(na * inner) * sizeof(double));
    std::memcpy(out.data.data() + (o * (na + nb) + na) * inner, b.data.data() + o * nb * inner,
                static_cast<size_t>(nb * inner) * sizeof(double));
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx) {
  require(x.rank() == 2, "gather_rows: expects rank-2 table, got " + shape_str(x.shape));
  int64_t R = x.shape[0], C = x.shape[1];
  Tensor out = Tensor::zeros({static_cast<int64_t>(idx.size()), C});
  for (size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < R, "gather_rows: index " + std::to_string(idx[r]) +
                                           " out of range for " + shape_str(x.shape));
    std::memcpy(out.data.data() + static_cast<int64_t>(r) * C, x.data.data() + idx[r] * C,
                static_cast<size_t>(C) * sizeof(double));
  }
  return out;
}

double sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data) s += v;
  return s;
}

double mean(const Tensor& x) {
  require(x.numel() > 0, "mean: empty tensor");
  return sum(x) / static_cast<double>(x.numel());
}

std::vector<int64_t> argmax(const Tensor& x, int axis) {
  check_axis(x, axis, "argmax");
  int64_t n = x.shape[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape[static_cast<size_t>(i)];
  int64_t outer = x.numel() / (n * inner);
  std::vector<int64_t> out(static_cast<size_t>(outer * inner));
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const double* base = x.data.data() + o * n * inner + in;
      int64_t best = 0;
      double bestv = base[0];
      for (int64_t i = 1; i < n; ++i) {
        double v = base[i * inner];
        if (v > bestv) {  // strict: ties keep the lowest index
          bestv = v;
          best = i;
        }
      }
      out[static_cast<size_t>(o * inner + in)] = best;
    }
  }
  return out;
}

Tensor dropout_mask(const std::vector<int64_t>& shape, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1), got " + std::to_string(rate));
  Tensor mask = Tensor::zeros(shape);
  double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data) v = (rng.uniform01() >= rate) ? keep_scale : 0.0;
  return mask;
}

Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return x;
  return hadamard(x, dropout_mask(x.shape, rate, rng));
}

}  // namespace ngt
