// SPDX-License-Identifier: Apache-2.0
//
// Times the serial reference kernels against their OpenMP counterparts and
// verifies the outputs are bit-identical. Run with OMP_NUM_THREADS set to
// compare thread counts.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "ngt/rng.hpp"
#include "ngt/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using ngt::Tensor;

Tensor randn(std::vector<int64_t> shape, ngt::Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.normal(0.0, 1.0);
  return t;
}

double time_ms(const std::function<Tensor()>& fn, int reps, Tensor& last) {
  // One warm-up rep, then the best of `reps`.
  last = fn();
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    last = fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

int g_mismatches = 0;

void report(const std::string& name, const std::function<Tensor()>& serial,
            const std::function<Tensor()>& parallel, int reps) {
  Tensor a, b;
  ngt::set_parallel_enabled(false);
  double ts = time_ms(serial, reps, a);
  ngt::set_parallel_enabled(true);
  double tp = time_ms(parallel, reps, b);
  bool same = a.same_shape(b) && a.data == b.data;
  if (!same) ++g_mismatches;
  std::printf("%-22s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n",
              name.c_str(), ts, tp, ts / tp, same ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif

  ngt::Rng rng = ngt::Rng::stream(7, "bench");
  // Shapes sized like one encoder layer of the large configuration.
  Tensor a = randn({512, 1024}, rng);
  Tensor w = randn({1024, 1024}, rng);
  Tensor wi = randn({1024, 4096}, rng);
  Tensor ba = randn({16, 512, 64}, rng);
  Tensor bb = randn({16, 64, 512}, rng);
  Tensor act = randn({512, 4096}, rng);
  Tensor gamma = Tensor::ones({1024});
  Tensor beta = Tensor::zeros({1024});

  report("matmul 512x1024x1024", [&] { return ngt::ref::matmul(a, w); },
         [&] { return ngt::matmul(a, w); }, 5);
  report("matmul 512x1024x4096", [&] { return ngt::ref::matmul(a, wi); },
         [&] { return ngt::matmul(a, wi); }, 5);
  report("bmm 16x512x64x512", [&] { return ngt::ref::bmm(ba, bb); },
         [&] { return ngt::bmm(ba, bb); }, 5);
  report("gelu 512x4096", [&] { return ngt::ref::gelu(act); },
         [&] { return ngt::gelu(act); }, 20);
  report("softmax 512x4096", [&] { return ngt::ref::softmax(act, 1); },
         [&] { return ngt::softmax(act, 1); }, 20);
  report("layer_norm 512x1024", [&] { return ngt::ref::layer_norm(a, gamma, beta, 1e-12); },
         [&] { return ngt::layer_norm(a, gamma, beta, 1e-12); }, 20);
  report("add_bias 512x4096", [&] { return ngt::ref::add_bias(act, ngt::Tensor::zeros({4096})); },
         [&] { return ngt::add_bias(act, ngt::Tensor::zeros({4096})); }, 20);

  if (g_mismatches) {
    std::printf("\n%d kernel(s) diverged from the serial reference\n", g_mismatches);
    return 1;
  }
  std::printf("\nall kernels bit-identical to the serial reference\n");
  return 0;
}
