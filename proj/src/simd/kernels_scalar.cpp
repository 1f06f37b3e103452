#include <cmath>

#include "pdac/simd/kernels.hpp"

namespace pdac::simd {
namespace {

void sgemm_scalar(std::int64_t m, std::int64_t n, std::int64_t k,
                  const float* a, const float* b, float* c, bool accumulate) {
  for (std::int64_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    if (!accumulate)
      for (std::int64_t j = 0; j < n; ++j) crow[j] = 0.0f;
    for (std::int64_t p = 0; p < k; ++p) {
      const float aik = a[i * k + p];
      if (aik == 0.0f) continue;
      const float* brow = b + p * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void axpy_scalar(std::int64_t n, float alpha, const float* x, float* y) {
  for (std::int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu_fwd_scalar(std::int64_t n, const float* x, float* y) {
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_bwd_scalar(std::int64_t n, const float* x, const float* dy,
                     float* dx) {
  for (std::int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

float dot_scalar(std::int64_t n, const float* a, const float* b) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += double(a[i]) * double(b[i]);
  return static_cast<float>(acc);
}

float reduce_sum_scalar(std::int64_t n, const float* x) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) acc += x[i];
  return static_cast<float>(acc);
}

void adam_step_scalar(std::int64_t n, float* p, const float* g, float* m,
                      float* v, float lr, float beta1, float beta2, float eps,
                      float bc1, float bc2) {
  for (std::int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0f - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0f - beta2) * g[i] * g[i];
    const float mhat = m[i] / bc1;
    const float vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{sgemm_scalar,      axpy_scalar, relu_fwd_scalar,
                         relu_bwd_scalar,   dot_scalar,  reduce_sum_scalar,
                         adam_step_scalar};
  return k;
}

}  // namespace pdac::simd
