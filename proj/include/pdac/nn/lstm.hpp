#pragma once

#include "pdac/nn/tensor.hpp"

namespace pdac::nn {

/// Single-layer unidirectional LSTM over a z-ordered feature sequence.
/// forward takes [T, D] and returns the hidden sequence [T, H]; length is
/// whatever the input provides.
class LSTM : public Module {
 public:
  LSTM(std::string name, int in_dim, int hidden, std::mt19937_64& rng);

  Tensor forward(const Tensor& seq);
  Tensor backward(const Tensor& dh_seq);
  void collect_params(std::vector<Param*>& out) override;

  int hidden() const { return hidden_; }

 private:
  int in_dim_, hidden_;
  Param wx_;  // [4H, D], gate order i,f,g,o
  Param wh_;  // [4H, H]
  Param b_;   // [4H]

  // caches
  Tensor xs_;
  std::vector<std::vector<float>> gates_;  // per step, activated, [4H]
  std::vector<std::vector<float>> cs_;     // cell states
  std::vector<std::vector<float>> hs_;
};

}  // namespace pdac::nn
