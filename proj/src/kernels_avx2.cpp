// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64 builds only; callers must check avx2_ops() for
// nullptr before use (the dispatcher in kernels.cpp does the cpuid check).

#include "attriflip/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>

namespace attriflip::kern {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_fmadd_pd(va, vb, acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum(acc) + tail;
}

double sum_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i];
  return hsum(acc) + tail;
}

void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    __m256d vx = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, vx, vy));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_scaled_avx2(double* out, const double* x, double w, const double* d,
                     std::size_t n) {
  __m256d vw = _mm256_set1_pd(w);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(x + i);
    __m256d vd = _mm256_loadu_pd(d + i);
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vw, vd, vx));
  }
  for (; i < n; ++i) out[i] = x[i] + w * d[i];
}

void relu_fwd_avx2(double* out, const double* in, std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(in + i), zero));
  for (; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_bwd_avx2(double* dx, const double* dy, const double* in,
                   std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(in + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = in[i] > 0.0 ? dy[i] : 0.0;
}

void sign_avx2(double* out, const double* in, std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(in + i);
    __m256d pos = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_GT_OQ), one);
    __m256d neg = _mm256_and_pd(_mm256_cmp_pd(v, zero, _CMP_LT_OQ), one);
    _mm256_storeu_pd(out + i, _mm256_sub_pd(pos, neg));
  }
  for (; i < n; ++i)
    out[i] = in[i] > 0.0 ? 1.0 : (in[i] < 0.0 ? -1.0 : 0.0);
}

void rmsprop_update_avx2(double* theta, double* cache, const double* g,
                         std::size_t n, double rho, double lr, double eps) {
  __m256d vrho = _mm256_set1_pd(rho);
  __m256d vomr = _mm256_set1_pd(1.0 - rho);
  __m256d vlr = _mm256_set1_pd(lr);
  __m256d veps = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vg = _mm256_loadu_pd(g + i);
    __m256d vc = _mm256_loadu_pd(cache + i);
    __m256d g2 = _mm256_mul_pd(vg, vg);
    vc = _mm256_fmadd_pd(vrho, vc, _mm256_mul_pd(vomr, g2));
    _mm256_storeu_pd(cache + i, vc);
    __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vc), veps);
    __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, vg), denom);
    _mm256_storeu_pd(theta + i, _mm256_sub_pd(_mm256_loadu_pd(theta + i), step));
  }
  for (; i < n; ++i) {
    cache[i] = rho * cache[i] + (1.0 - rho) * g[i] * g[i];
    theta[i] -= lr * g[i] / (std::sqrt(cache[i]) + eps);
  }
}

}  // namespace

const Ops* avx2_ops() {
  static const Ops k{
      "avx2",          dot_avx2,        sum_avx2,
      axpy_avx2,       add_scaled_avx2, relu_fwd_avx2,
      relu_bwd_avx2,   sign_avx2,       rmsprop_update_avx2,
  };
  return &k;
}

}  // namespace attriflip::kern

#else

namespace attriflip::kern {
const Ops* avx2_ops() { return nullptr; }
}  // namespace attriflip::kern

#endif
