#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "limbguard/kernels.hpp"

namespace limbguard {
namespace avx2 {

static inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d h = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, h));
}

void dense_forward_relu(const double* x, std::size_t rows, std::size_t in_dim,
                        const double* w, const double* b, std::size_t out_dim,
                        double* a) {
  const std::size_t in4 = in_dim & ~std::size_t{3};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * in_dim;
    double* ar = a + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wo = w + o * in_dim;
      __m256d acc = _mm256_setzero_pd();
      std::size_t i = 0;
      for (; i < in4; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(wo + i), _mm256_loadu_pd(xr + i), acc);
      }
      double s = hsum(acc);
      for (; i < in_dim; ++i) s += wo[i] * xr[i];
      s += b[o];
      ar[o] = s > 0.0 ? s : 0.0;
    }
  }
}

void relu_backward(const double* g, const double* a, std::size_t n, double* dz) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d av = _mm256_loadu_pd(a + i);
    const __m256d gv = _mm256_loadu_pd(g + i);
    const __m256d mask = _mm256_cmp_pd(av, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dz + i, _mm256_and_pd(gv, mask));
  }
  for (; i < n; ++i) dz[i] = a[i] > 0.0 ? g[i] : 0.0;
}

void accumulate_grads(const double* dz, const double* x, std::size_t rows,
                      std::size_t out_dim, std::size_t in_dim,
                      double* gw, double* gb) {
  const std::size_t in4 = in_dim & ~std::size_t{3};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dzr = dz + r * out_dim;
    const double* xr = x + r * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double d = dzr[o];
      const __m256d dv = _mm256_set1_pd(d);
      double* gwo = gw + o * in_dim;
      std::size_t i = 0;
      for (; i < in4; i += 4) {
        const __m256d acc =
            _mm256_fmadd_pd(dv, _mm256_loadu_pd(xr + i), _mm256_loadu_pd(gwo + i));
        _mm256_storeu_pd(gwo + i, acc);
      }
      for (; i < in_dim; ++i) gwo[i] += d * xr[i];
      gb[o] += d;
    }
  }
}

void backprop_data(const double* dz, const double* w, std::size_t rows,
                   std::size_t out_dim, std::size_t in_dim, double* gx) {
  const std::size_t in4 = in_dim & ~std::size_t{3};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dzr = dz + r * out_dim;
    double* gxr = gx + r * in_dim;
    std::size_t i = 0;
    for (; i < in4; i += 4) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t o = 0; o < out_dim; ++o) {
        acc = _mm256_fmadd_pd(_mm256_set1_pd(dzr[o]), _mm256_loadu_pd(w + o * in_dim + i), acc);
      }
      _mm256_storeu_pd(gxr + i, acc);
    }
    for (; i < in_dim; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out_dim; ++o) acc += dzr[o] * w[o * in_dim + i];
      gxr[i] = acc;
    }
  }
}

void row_mse(const double* a, const double* b, std::size_t rows, std::size_t k,
             double* out) {
  const double inv_k = 1.0 / static_cast<double>(k);
  if (k == 4) {
    for (std::size_t r = 0; r < rows; ++r) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + r * 4), _mm256_loadu_pd(b + r * 4));
      out[r] = hsum(_mm256_mul_pd(d, d)) * inv_k;
    }
    return;
  }
  const std::size_t k4 = k & ~std::size_t{3};
  for (std::size_t r = 0; r < rows; ++r) {
    const double* ar = a + r * k;
    const double* br = b + r * k;
    __m256d acc = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j < k4; j += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(ar + j), _mm256_loadu_pd(br + j));
      acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; j < k; ++j) {
      const double d = ar[j] - br[j];
      s += d * d;
    }
    out[r] = s * inv_k;
  }
}

void minmax_scale(const double* x, std::size_t rows, std::size_t cols,
                  const double* mins, const double* range, double* y) {
  if (cols == 4) {
    const __m256d vmin = _mm256_loadu_pd(mins);
    const __m256d vrange = _mm256_loadu_pd(range);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d live = _mm256_cmp_pd(vrange, zero, _CMP_GT_OQ);
    for (std::size_t r = 0; r < rows; ++r) {
      const __m256d q =
          _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(x + r * 4), vmin), vrange);
      _mm256_storeu_pd(y + r * 4, _mm256_blendv_pd(zero, q, live));
    }
    return;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* yr = y + r * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = range[j] > 0.0 ? (xr[j] - mins[j]) / range[j] : 0.0;
    }
  }
}

}  // namespace avx2

const Kernels& avx2_kernels() {
  static const Kernels k = {
      "avx2",
      avx2::dense_forward_relu,
      avx2::relu_backward,
      avx2::accumulate_grads,
      avx2::backprop_data,
      avx2::row_mse,
      avx2::minmax_scale,
  };
  return k;
}

}  // namespace limbguard

#endif  // x86-64
