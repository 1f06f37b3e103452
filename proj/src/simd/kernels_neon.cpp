#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "pdac/simd/kernels.hpp"

namespace pdac::simd {
namespace {

void sgemm_neon(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
                const float* b, float* c, bool accumulate) {
  const std::int64_t n4 = n & ~std::int64_t(3);
  for (std::int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (!accumulate)
      for (std::int64_t j = 0; j < n; ++j) crow[j] = 0.0f;
    for (std::int64_t p = 0; p < k; ++p) {
      const float aik = a[i * k + p];
      if (aik == 0.0f) continue;
      const float32x4_t va = vdupq_n_f32(aik);
      const float* brow = b + p * n;
      std::int64_t j = 0;
      for (; j < n4; j += 4)
        vst1q_f32(crow + j,
                  vfmaq_f32(vld1q_f32(crow + j), va, vld1q_f32(brow + j)));
      for (; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void axpy_neon(std::int64_t n, float alpha, const float* x, float* y) {
  const float32x4_t va = vdupq_n_f32(alpha);
  std::int64_t i = 0;
  for (; i + 3 < n; i += 4)
    vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu_fwd_neon(std::int64_t n, const float* x, float* y) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::int64_t i = 0;
  for (; i + 3 < n; i += 4)
    vst1q_f32(y + i, vmaxq_f32(zero, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_neon(std::int64_t n, const float* x, const float* dy, float* dx) {
  const float32x4_t zero = vdupq_n_f32(0.0f);
  std::int64_t i = 0;
  for (; i + 3 < n; i += 4) {
    const uint32x4_t mask = vcgtq_f32(vld1q_f32(x + i), zero);
    vst1q_f32(dx + i, vreinterpretq_f32_u32(vandq_u32(
                          mask, vreinterpretq_u32_f32(vld1q_f32(dy + i)))));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

float dot_neon(std::int64_t n, const float* a, const float* b) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::int64_t i = 0;
  for (; i + 3 < n; i += 4)
    acc = vfmaq_f32(acc, vld1q_f32(a + i), vld1q_f32(b + i));
  float s = vaddvq_f32(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

float reduce_sum_neon(std::int64_t n, const float* x) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  std::int64_t i = 0;
  for (; i + 3 < n; i += 4) acc = vaddq_f32(acc, vld1q_f32(x + i));
  float s = vaddvq_f32(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

void adam_step_neon(std::int64_t n, float* p, const float* g, float* m,
                    float* v, float lr, float beta1, float beta2, float eps,
                    float bc1, float bc2) {
  for (std::int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const Kernels& neon_kernels() {
  static const Kernels k{sgemm_neon,    axpy_neon, relu_fwd_neon,
                         relu_bwd_neon, dot_neon,  reduce_sum_neon,
                         adam_step_neon};
  return k;
}

}  // namespace pdac::simd

#endif  // __aarch64__
