#pragma once

#include <cstddef>

namespace limbguard {

// Batched arithmetic kernels behind the scaler and the dense network. Each
// entry has a scalar reference implementation and, on x86-64, an AVX2 variant
// selected at runtime. Variants are equivalence-tested against each other;
// within one process the active variant is fixed, so results are reproducible
// run to run on the same machine.
struct Kernels {
  const char* name;

  // a[r*out+o] = max(0, dot(x[r*in .. ], w[o*in .. ]) + b[o])
  void (*dense_forward_relu)(const double* x, std::size_t rows, std::size_t in_dim,
                             const double* w, const double* b, std::size_t out_dim,
                             double* a);

  // dz[i] = a[i] > 0 ? g[i] : 0   (ReLU subgradient at 0 is 0)
  void (*relu_backward)(const double* g, const double* a, std::size_t n, double* dz);

  // gw[o*in+i] += sum_r dz[r*out+o] * x[r*in+i];  gb[o] += sum_r dz[r*out+o]
  void (*accumulate_grads)(const double* dz, const double* x, std::size_t rows,
                           std::size_t out_dim, std::size_t in_dim,
                           double* gw, double* gb);

  // gx[r*in+i] = sum_o dz[r*out+o] * w[o*in+i]
  void (*backprop_data)(const double* dz, const double* w, std::size_t rows,
                        std::size_t out_dim, std::size_t in_dim, double* gx);

  // out[r] = (1/k) * sum_j (a[r*k+j] - b[r*k+j])^2
  void (*row_mse)(const double* a, const double* b, std::size_t rows, std::size_t k,
                  double* out);

  // y[r*cols+j] = range[j] > 0 ? (x[r*cols+j] - mins[j]) / range[j] : 0
  // Division (not multiplication by a reciprocal) so column extrema map to
  // exactly 0 and 1.
  void (*minmax_scale)(const double* x, std::size_t rows, std::size_t cols,
                       const double* mins, const double* range, double* y);
};

const Kernels& scalar_kernels();

bool avx2_available();
#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels();
#endif

// Resolved once per process: LIMBGUARD_SIMD=scalar|avx2|auto (default auto).
const Kernels& active_kernels();

}  // namespace limbguard
