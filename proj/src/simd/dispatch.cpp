#include <stdexcept>

#include "pdac/simd/kernels.hpp"

namespace pdac::simd {
namespace {

const Kernels* best_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return &avx2_kernels();
#elif defined(__aarch64__)
  return &neon_kernels();
#endif
  return &scalar_kernels();
}

const Kernels* g_active = nullptr;
std::string g_name;

void resolve_auto() {
  g_active = best_supported();
  g_name = (g_active == &scalar_kernels()) ? "scalar" :
#if defined(__x86_64__) || defined(_M_X64)
                                           "avx2";
#elif defined(__aarch64__)
                                           "neon";
#else
                                           "scalar";
#endif
}

}  // namespace

const Kernels& active() {
  if (!g_active) resolve_auto();
  return *g_active;
}

void force_backend(const std::string& name) {
  if (name == "auto") {
    resolve_auto();
    return;
  }
  if (name == "scalar") {
    g_active = &scalar_kernels();
    g_name = "scalar";
    return;
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") {
    if (!(__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")))
      throw std::runtime_error("simd: avx2 not supported on this CPU");
    g_active = &avx2_kernels();
    g_name = "avx2";
    return;
  }
#endif
#if defined(__aarch64__)
  if (name == "neon") {
    g_active = &neon_kernels();
    g_name = "neon";
    return;
  }
#endif
  throw std::runtime_error("simd: unknown backend '" + name + "'");
}

std::string active_backend_name() {
  if (!g_active) resolve_auto();
  return g_name;
}

}  // namespace pdac::simd
