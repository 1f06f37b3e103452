#include "pdac/nn/tensor.hpp"

#include <cmath>

namespace pdac::nn {

void he_init(Tensor& t, std::int64_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(
      0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (float& x : t.v) x = dist(rng);
}

void uniform_init(Tensor& t, std::int64_t fan_in, std::mt19937_64& rng) {
  const float b = 1.0f / std::sqrt(static_cast<float>(fan_in));
  std::uniform_real_distribution<float> dist(-b, b);
  for (float& x : t.v) x = dist(rng);
}

}  // namespace pdac::nn
