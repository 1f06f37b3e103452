#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "pdac/simd/kernels.hpp"

namespace pdac::simd {
namespace {

// Broadcast-A / stream-B kernel: each A element is fused-multiplied against
// 8-wide B row segments. Tail columns fall back to scalar.
void sgemm_avx2(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
                const float* b, float* c, bool accumulate) {
  const std::int64_t n8 = n & ~std::int64_t(7);
  for (std::int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (!accumulate) {
      for (std::int64_t j = 0; j < n8; j += 8)
        _mm256_storeu_ps(crow + j, _mm256_setzero_ps());
      for (std::int64_t j = n8; j < n; ++j) crow[j] = 0.0f;
    }
    for (std::int64_t p = 0; p < k; ++p) {
      const float aik = a[i * k + p];
      if (aik == 0.0f) continue;
      const __m256 va = _mm256_set1_ps(aik);
      const float* brow = b + p * n;
      std::int64_t j = 0;
      for (; j + 31 < n; j += 32) {
        _mm256_storeu_ps(crow + j,
                         _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j),
                                         _mm256_loadu_ps(crow + j)));
        _mm256_storeu_ps(crow + j + 8,
                         _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j + 8),
                                         _mm256_loadu_ps(crow + j + 8)));
        _mm256_storeu_ps(crow + j + 16,
                         _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j + 16),
                                         _mm256_loadu_ps(crow + j + 16)));
        _mm256_storeu_ps(crow + j + 24,
                         _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j + 24),
                                         _mm256_loadu_ps(crow + j + 24)));
      }
      for (; j + 7 < n; j += 8)
        _mm256_storeu_ps(crow + j,
                         _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j),
                                         _mm256_loadu_ps(crow + j)));
      for (; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void axpy_avx2(std::int64_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::int64_t i = 0;
  for (; i + 7 < n; i += 8)
    _mm256_storeu_ps(
        y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu_fwd_avx2(std::int64_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::int64_t i = 0;
  for (; i + 7 < n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_max_ps(zero, _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_avx2(std::int64_t n, const float* x, const float* dy, float* dx) {
  const __m256 zero = _mm256_setzero_ps();
  std::int64_t i = 0;
  for (; i + 7 < n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  return _mm_cvtss_f32(lo);
}

float dot_avx2(std::int64_t n, const float* a, const float* b) {
  __m256 acc = _mm256_setzero_ps();
  std::int64_t i = 0;
  for (; i + 7 < n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
  float s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

float reduce_sum_avx2(std::int64_t n, const float* x) {
  __m256 acc = _mm256_setzero_ps();
  std::int64_t i = 0;
  for (; i + 7 < n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void adam_step_avx2(std::int64_t n, float* p, const float* g, float* m,
                    float* v, float lr, float beta1, float beta2, float eps,
                    float bc1, float bc2) {
  const __m256 vb1 = _mm256_set1_ps(beta1);
  const __m256 vb2 = _mm256_set1_ps(beta2);
  const __m256 vomb1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 vomb2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 veps = _mm256_set1_ps(eps);
  const __m256 vbc1 = _mm256_set1_ps(bc1);
  const __m256 vbc2 = _mm256_set1_ps(bc2);
  std::int64_t i = 0;
  for (; i + 7 < n; i += 8) {
    const __m256 gi = _mm256_loadu_ps(g + i);
    __m256 mi = _mm256_fmadd_ps(vomb1, gi, _mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)));
    __m256 vi = _mm256_fmadd_ps(vomb2, _mm256_mul_ps(gi, gi),
                                _mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 mhat = _mm256_div_ps(mi, vbc1);
    const __m256 vhat = _mm256_div_ps(vi, vbc2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), veps);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(vlr, mhat), denom);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const Kernels& avx2_kernels() {
  static const Kernels k{sgemm_avx2,    axpy_avx2, relu_fwd_avx2,
                         relu_bwd_avx2, dot_avx2,  reduce_sum_avx2,
                         adam_step_avx2};
  return k;
}

}  // namespace pdac::simd

#endif  // x86_64
