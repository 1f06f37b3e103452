#pragma once

#include <cmath>
#include <vector>

#include "pdac/nn/tensor.hpp"
#include "pdac/simd/kernels.hpp"

namespace pdac::nn {

/// Adam over a fixed parameter list; state is positional, so the list must
/// not change between steps.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, float lr = 1e-3f,
                float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (Param* p : params_) {
      m_.emplace_back(p->w.shape);
      v_.emplace_back(p->w.shape);
    }
  }

  void set_lr(float lr) { lr_ = lr; }

  void step() {
    ++t_;
    const float bc1 = 1.0f - std::pow(b1_, static_cast<float>(t_));
    const float bc2 = 1.0f - std::pow(b2_, static_cast<float>(t_));
    const auto& K = simd::active();
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param* p = params_[i];
      K.adam_step(p->w.numel(), p->w.data(), p->g.data(), m_[i].data(),
                  v_[i].data(), lr_, b1_, b2_, eps_, bc1, bc2);
    }
  }

  void zero_grad() {
    for (Param* p : params_) p->g.zero();
  }

 private:
  std::vector<Param*> params_;
  std::vector<Tensor> m_, v_;
  float lr_, b1_, b2_, eps_;
  int t_ = 0;
};

}  // namespace pdac::nn
