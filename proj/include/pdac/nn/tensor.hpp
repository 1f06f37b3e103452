#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pdac/core/types.hpp"

namespace pdac::nn {

/// Dense row-major float tensor. Shapes are descriptive only; all kernels
/// operate on the flat buffer.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> v;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s, float fill = 0.0f)
      : shape(std::move(s)) {
    v.assign(static_cast<std::size_t>(numel_of(shape)), fill);
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }
  std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }

  float* data() { return v.data(); }
  const float* data() const { return v.data(); }

  void zero() { std::fill(v.begin(), v.end(), 0.0f); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

/// A learnable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor w;
  Tensor g;

  Param() = default;
  Param(std::string n, std::vector<std::int64_t> shape)
      : name(std::move(n)), w(shape), g(shape) {}
};

/// He-normal fill, fan_in as given.
void he_init(Tensor& t, std::int64_t fan_in, std::mt19937_64& rng);
/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) fill.
void uniform_init(Tensor& t, std::int64_t fan_in, std::mt19937_64& rng);

struct Module {
  virtual ~Module() = default;
  virtual void collect_params(std::vector<Param*>& out) = 0;

  std::vector<Param*> params() {
    std::vector<Param*> out;
    collect_params(out);
    return out;
  }
  void zero_grad() {
    for (Param* p : params()) p->g.zero();
  }
};

}  // namespace pdac::nn
