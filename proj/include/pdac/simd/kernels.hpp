#pragma once

#include <cstdint>
#include <string>

namespace pdac::simd {

// Hot float kernels behind a runtime-dispatched table. The scalar entries are
// the reference semantics; vector backends must match them within the
// tolerances asserted in tests/test_kernels.cpp (bitwise for relu, small
// relative error where fused multiply-add or summation order differs).
struct Kernels {
  // C[M x N] = A[M x K] * B[K x N] (row-major); accumulates into C if
  // accumulate is true, overwrites otherwise.
  void (*sgemm)(std::int64_t m, std::int64_t n, std::int64_t k, const float* a,
                const float* b, float* c, bool accumulate);
  // y += alpha * x
  void (*axpy)(std::int64_t n, float alpha, const float* x, float* y);
  void (*relu_fwd)(std::int64_t n, const float* x, float* y);
  // dx = (x > 0) ? dy : 0
  void (*relu_bwd)(std::int64_t n, const float* x, const float* dy, float* dx);
  float (*dot)(std::int64_t n, const float* a, const float* b);
  float (*reduce_sum)(std::int64_t n, const float* x);
  // One Adam update over n parameters. bc1/bc2 are the precomputed bias
  // corrections 1 - beta^t.
  void (*adam_step)(std::int64_t n, float* p, const float* g, float* m,
                    float* v, float lr, float beta1, float beta2, float eps,
                    float bc1, float bc2);
};

const Kernels& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2_kernels();
#endif
#if defined(__aarch64__)
const Kernels& neon_kernels();
#endif

/// Best backend the CPU supports (resolved once, overridable).
const Kernels& active();

/// "auto", "scalar", "avx2" or "neon"; unknown/unsupported names throw.
void force_backend(const std::string& name);
std::string active_backend_name();

}  // namespace pdac::simd
