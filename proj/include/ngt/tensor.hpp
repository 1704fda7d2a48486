// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major tensor of 64-bit reals plus the numeric kernels everything
// else composes. The hot kernels come in two flavours: a serial reference in
// ngt::ref and OpenMP entry points in ngt:: that split work across
// independent output slices. The per-element arithmetic order is identical in
// both, so results are bit-identical regardless of thread count; tests assert
// this and the bench target compares their throughput.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ngt {

class Rng;

struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;  // row-major, size == product(shape)

  Tensor() = default;
  Tensor(std::vector<int64_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor ones(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor row(std::vector<double> values);  // rank-1 convenience

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<int64_t>& shape);
int64_t shape_numel(const std::vector<int64_t>& shape);

// Runtime switch for the OpenMP paths. Kernels also fall back to the serial
// reference when the work is below parallel_min_work() (region overhead).
void set_parallel_enabled(bool on);
bool parallel_enabled();
void set_parallel_min_work(int64_t work);
int64_t parallel_min_work();

// ---------------------------------------------------------------------------
// Serial reference kernels.
// ---------------------------------------------------------------------------
namespace ref {
Tensor matmul(const Tensor& a, const Tensor& b);  // (M,K)x(K,N)
Tensor bmm(const Tensor& a, const Tensor& b);     // (G,M,K)x(G,K,N)
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);  // bias over last axis
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps);
}  // namespace ref

// ---------------------------------------------------------------------------
// OpenMP kernels (bit-identical to ngt::ref).
// ---------------------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor bmm(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps);

// ---------------------------------------------------------------------------
// Layout and reduction ops. Serial: reshuffles are memory-bound and the
// reductions keep a fixed summation order.
// ---------------------------------------------------------------------------
Tensor transpose2d(const Tensor& x);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor reshape(const Tensor& x, std::vector<int64_t> new_shape);
Tensor slice(const Tensor& x, int axis, int64_t start, int64_t len);
Tensor concat(const Tensor& a, const Tensor& b, int axis);
Tensor gather_rows(const Tensor& x, const std::vector<int64_t>& idx);
double sum(const Tensor& x);
double mean(const Tensor& x);
// Index of the max along `axis`; ties resolve to the lowest index.
std::vector<int64_t> argmax(const Tensor& x, int axis);

// Inverted dropout: survivors are scaled by 1/(1-rate) so evaluation needs no
// rescaling. train=false or rate=0 is the identity and consumes no draws.
Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng);
Tensor dropout_mask(const std::vector<int64_t>& shape, double rate, Rng& rng);

}  // namespace ngt
