#include "limbguard/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace limbguard {

namespace scalar {

void dense_forward_relu(const double* x, std::size_t rows, std::size_t in_dim,
                        const double* w, const double* b, std::size_t out_dim,
                        double* a) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in_dim;
    double* ar = a + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wo = w + o * in_dim;
      double acc = 0.0;
      for (std::size_t i = 0; i < in_dim; ++i) acc += wo[i] * xr[i];
      acc += b[o];
      ar[o] = acc > 0.0 ? acc : 0.0;
    }
  }
}

void relu_backward(const double* g, const double* a, std::size_t n, double* dz) {
  for (std::size_t i = 0; i < n; ++i) dz[i] = a[i] > 0.0 ? g[i] : 0.0;
}

void accumulate_grads(const double* dz, const double* x, std::size_t rows,
                      std::size_t out_dim, std::size_t in_dim,
                      double* gw, double* gb) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dzr = dz + r * out_dim;
    const double* xr = x + r * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double d = dzr[o];
      double* gwo = gw + o * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) gwo[i] += d * xr[i];
      gb[o] += d;
    }
  }
}

void backprop_data(const double* dz, const double* w, std::size_t rows,
                   std::size_t out_dim, std::size_t in_dim, double* gx) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dzr = dz + r * out_dim;
    double* gxr = gx + r * in_dim;
    for (std::size_t i = 0; i < in_dim; ++i) gxr[i] = 0.0;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double d = dzr[o];
      const double* wo = w + o * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) gxr[i] += d * wo[i];
    }
  }
}

void row_mse(const double* a, const double* b, std::size_t rows, std::size_t k,
             double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a + r * k;
    const double* br = b + r * k;
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = ar[j] - br[j];
      acc += d * d;
    }
    out[r] = acc / static_cast<double>(k);
  }
}

void minmax_scale(const double* x, std::size_t rows, std::size_t cols,
                  const double* mins, const double* range, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = range[j] > 0.0 ? (xr[j] - mins[j]) / range[j] : 0.0;
    }
  }
}

}  // namespace scalar

const Kernels& scalar_kernels() {
  static const Kernels k = {
      "scalar",
      scalar::dense_forward_relu,
      scalar::relu_backward,
      scalar::accumulate_grads,
      scalar::backprop_data,
      scalar::row_mse,
      scalar::minmax_scale,
  };
  return k;
}

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Kernels& resolve_kernels() {
  const char* env = std::getenv("LIMBGUARD_SIMD");
  const std::string mode = env ? env : "auto";
  if (mode == "scalar") return scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
  if (mode == "avx2") {
    if (!avx2_available()) throw std::runtime_error("LIMBGUARD_SIMD=avx2 but CPU lacks AVX2/FMA");
    return avx2_kernels();
  }
  if (mode == "auto") return avx2_available() ? avx2_kernels() : scalar_kernels();
#else
  if (mode == "auto") return scalar_kernels();
#endif
  throw std::runtime_error("LIMBGUARD_SIMD must be scalar, avx2 or auto, got '" + mode + "'");
}

}  // namespace

const Kernels& active_kernels() {
  static const Kernels& k = resolve_kernels();
  return k;
}

}  // namespace limbguard
