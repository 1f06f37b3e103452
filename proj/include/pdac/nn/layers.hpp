#pragma once

#include <memory>

#include "pdac/nn/tensor.hpp"

namespace pdac::nn {

// Layers cache whatever the backward pass needs; call forward before backward.
// Activations are [C, spatial...] without a batch axis; training loops feed
// one sample at a time and accumulate gradients.

class Conv3d : public Module {
 public:
  Conv3d(std::string name, int in_ch, int out_ch, int ksize, int stride,
         int pad, std::mt19937_64& rng);

  Tensor forward(const Tensor& x);    // x: [C, Z, Y, X]
  Tensor backward(const Tensor& dy);  // returns dx
  void collect_params(std::vector<Param*>& out) override;

  int in_ch() const { return in_ch_; }
  int out_ch() const { return out_ch_; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_ch_, out_ch_, ksize_, stride_, pad_;
  Param weight_;  // [out_ch, in_ch * k^3]
  Param bias_;    // [out_ch]
  Tensor x_;      // cached input
};

class Conv2d : public Module {
 public:
  Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride,
         int pad, std::mt19937_64& rng);

  Tensor forward(const Tensor& x);    // x: [C, H, W]
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_ch_, out_ch_, ksize_, stride_, pad_;
  Param weight_;  // [out_ch, in_ch * k^2]
  Param bias_;
  Tensor x_;
};

class Linear : public Module {
 public:
  Linear(std::string name, int in_dim, int out_dim, std::mt19937_64& rng);

  Tensor forward(const Tensor& x);    // x: [N, in] or [in]
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>& out) override;

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  int in_dim_, out_dim_;
  Param weight_;  // [out, in]
  Param bias_;    // [out]
  Tensor x_;
};

class ReLU : public Module {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>&) override {}

 private:
  Tensor x_;
};

/// Mean over all spatial positions: [C, spatial...] -> [C].
class GlobalAvgPool : public Module {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>&) override {}

 private:
  std::vector<std::int64_t> in_shape_;
};

/// Max over all spatial positions: [C, spatial...] -> [C]. Backward routes
/// the gradient to the argmax position of each channel.
class GlobalMaxPool : public Module {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>&) override {}

 private:
  std::vector<std::int64_t> in_shape_;
  std::vector<std::int64_t> argmax_;
};

/// Nearest-neighbour 2x upsampling of [C, Z, Y, X].
class Upsample3d2x : public Module {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void collect_params(std::vector<Param*>&) override {}

 private:
  std::vector<std::int64_t> in_shape_;
};

// Channel concat helpers for skip connections.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, std::int64_t ca, Tensor& da, Tensor& db);

}  // namespace pdac::nn
