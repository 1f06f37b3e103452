#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pdac/simd/kernels.hpp"

using namespace pdac::simd;

namespace {

std::vector<float> random_vec(std::int64_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> d(-2.0f, 2.0f);
  std::vector<float> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Equivalence of one backend against the scalar reference.
void check_backend(const Kernels& k) {
  std::mt19937_64 rng(77);
  const Kernels& ref = scalar_kernels();

  for (int it = 0; it < 40; ++it) {
    std::uniform_int_distribution<std::int64_t> dim(1, 65);
    const auto m = dim(rng), n = dim(rng), kk = dim(rng);
    auto a = random_vec(m * kk, rng);
    auto b = random_vec(kk * n, rng);
    auto c0 = random_vec(m * n, rng);
    auto c1 = c0;
    const bool acc = it % 2 == 0;
    ref.sgemm(m, n, kk, a.data(), b.data(), c0.data(), acc);
    k.sgemm(m, n, kk, a.data(), b.data(), c1.data(), acc);
    for (std::size_t i = 0; i < c0.size(); ++i)
      REQUIRE(rel_err(c0[i], c1[i]) < 1e-5);
  }

  for (int it = 0; it < 40; ++it) {
    std::uniform_int_distribution<std::int64_t> len(1, 2000);
    const auto n = len(rng);
    auto x = random_vec(n, rng);
    auto y0 = random_vec(n, rng);
    auto y1 = y0;
    ref.axpy(n, 0.37f, x.data(), y0.data());
    k.axpy(n, 0.37f, x.data(), y1.data());
    // fused multiply-add changes the rounding, so compare with tolerance
    for (std::size_t i = 0; i < y0.size(); ++i)
      REQUIRE(rel_err(y0[i], y1[i]) < 1e-6);

    std::vector<float> r0(static_cast<std::size_t>(n)), r1 = r0;
    ref.relu_fwd(n, x.data(), r0.data());
    k.relu_fwd(n, x.data(), r1.data());
    REQUIRE(r0 == r1);

    auto dy = random_vec(n, rng);
    ref.relu_bwd(n, x.data(), dy.data(), r0.data());
    k.relu_bwd(n, x.data(), dy.data(), r1.data());
    REQUIRE(r0 == r1);

    REQUIRE(rel_err(ref.dot(n, x.data(), dy.data()),
                    k.dot(n, x.data(), dy.data())) < 1e-5);
    REQUIRE(rel_err(ref.reduce_sum(n, x.data()),
                    k.reduce_sum(n, x.data())) < 1e-5);
  }

  for (int it = 0; it < 20; ++it) {
    std::uniform_int_distribution<std::int64_t> len(1, 500);
    const auto n = len(rng);
    auto p0 = random_vec(n, rng), g = random_vec(n, rng);
    auto m0 = random_vec(n, rng), v0 = random_vec(n, rng);
    for (auto& x : v0) x = std::abs(x);
    auto p1 = p0, m1 = m0, v1 = v0;
    ref.adam_step(n, p0.data(), g.data(), m0.data(), v0.data(), 1e-3f, 0.9f,
                  0.999f, 1e-8f, 0.1f, 0.001999f);
    k.adam_step(n, p1.data(), g.data(), m1.data(), v1.data(), 1e-3f, 0.9f,
                0.999f, 1e-8f, 0.1f, 0.001999f);
    for (std::size_t i = 0; i < p0.size(); ++i) {
      REQUIRE(rel_err(p0[i], p1[i]) < 1e-5);
      REQUIRE(rel_err(m0[i], m1[i]) < 1e-5);
      REQUIRE(rel_err(v0[i], v1[i]) < 1e-5);
    }
  }
}

}  // namespace

TEST_CASE("scalar gemm matches a naive triple loop") {
  std::mt19937_64 rng(7);
  const Kernels& ref = scalar_kernels();
  for (int it = 0; it < 30; ++it) {
    std::uniform_int_distribution<std::int64_t> dim(1, 20);
    const auto m = dim(rng), n = dim(rng), k = dim(rng);
    auto a = random_vec(m * k, rng);
    auto b = random_vec(k * n, rng);
    std::vector<float> c(static_cast<std::size_t>(m * n), 0.0f);
    ref.sgemm(m, n, k, a.data(), b.data(), c.data(), false);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::int64_t l = 0; l < k; ++l)
          acc += double(a[i * k + l]) * double(b[l * n + j]);
        REQUIRE(rel_err(acc, c[i * n + j]) < 1e-5);
      }
  }
}

TEST_CASE("backend dispatch") {
  force_backend("scalar");
  CHECK(active_backend_name() == "scalar");
  force_backend("auto");
  CHECK_THROWS(force_backend("sse9"));
  force_backend("auto");
}

#if defined(__x86_64__) || defined(_M_X64)
TEST_CASE("avx2 kernels match the scalar reference") {
  bool have = true;
  try {
    force_backend("avx2");
  } catch (const std::exception&) {
    have = false;  // CPU without AVX2
  }
  force_backend("auto");
  if (!have) return;
  check_backend(avx2_kernels());
}
#endif

#if defined(__aarch64__)
TEST_CASE("neon kernels match the scalar reference") {
  check_backend(neon_kernels());
}
#endif

TEST_CASE("active backend matches the scalar reference") {
  force_backend("auto");
  check_backend(active());
}
