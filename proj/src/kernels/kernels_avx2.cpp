#include "kernels_internal.hpp"

#if defined(COPS_HAVE_AVX2_KERNELS)

#include <immintrin.h>

#define COPS_AVX2_TARGET __attribute__((target("avx2,fma")))

namespace cops::kernels::avx2 {

namespace {

COPS_AVX2_TARGET inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

COPS_AVX2_TARGET double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

COPS_AVX2_TARGET void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

COPS_AVX2_TARGET void rank1_update(double alpha, const double* x, double* a, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) axpy(alpha * x[r], x, a + r * n, n);
}

COPS_AVX2_TARGET double quad_form(const double* x, const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t r = 0; r < n; ++r) s += x[r] * dot(a + r * n, x, n);
  return s;
}

}  // namespace cops::kernels::avx2

#endif
