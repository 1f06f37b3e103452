#include "pdac/nn/lstm.hpp"

#include <cmath>

#include "pdac/simd/kernels.hpp"

namespace pdac::nn {
namespace {

float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace

LSTM::LSTM(std::string name, int in_dim, int hidden, std::mt19937_64& rng)
    : in_dim_(in_dim),
      hidden_(hidden),
      wx_(name + ".wx", {4 * std::int64_t(hidden), in_dim}),
      wh_(name + ".wh", {4 * std::int64_t(hidden), hidden}),
      b_(name + ".b", {4 * std::int64_t(hidden)}) {
  uniform_init(wx_.w, in_dim, rng);
  uniform_init(wh_.w, hidden, rng);
  // forget-gate bias starts positive so early training keeps state
  for (int j = 0; j < hidden; ++j) b_.w.v[hidden + j] = 1.0f;
}

void LSTM::collect_params(std::vector<Param*>& out) {
  out.push_back(&wx_);
  out.push_back(&wh_);
  out.push_back(&b_);
}

Tensor LSTM::forward(const Tensor& seq) {
  if (seq.shape.size() != 2 || seq.shape[1] != in_dim_)
    throw ShapeError("LSTM: expected [T, in_dim] input");
  const std::int64_t T = seq.shape[0];
  const int H = hidden_;
  xs_ = seq;
  gates_.assign(T, std::vector<float>(4 * H));
  cs_.assign(T, std::vector<float>(H));
  hs_.assign(T, std::vector<float>(H));

  const auto& K = simd::active();
  std::vector<float> z(4 * H);
  std::vector<float> h_prev(H, 0.0f), c_prev(H, 0.0f);
  Tensor out({T, H});
  for (std::int64_t t = 0; t < T; ++t) {
    const float* xt = seq.data() + t * in_dim_;
    for (int r = 0; r < 4 * H; ++r)
      z[r] = b_.w.v[r] + K.dot(in_dim_, wx_.w.data() + r * in_dim_, xt) +
             K.dot(H, wh_.w.data() + r * H, h_prev.data());
    auto& g = gates_[t];
    for (int j = 0; j < H; ++j) {
      g[j] = sigmoidf(z[j]);                       // i
      g[H + j] = sigmoidf(z[H + j]);               // f
      g[2 * H + j] = std::tanh(z[2 * H + j]);      // g
      g[3 * H + j] = sigmoidf(z[3 * H + j]);       // o
      cs_[t][j] = g[H + j] * c_prev[j] + g[j] * g[2 * H + j];
      hs_[t][j] = g[3 * H + j] * std::tanh(cs_[t][j]);
      out.v[t * H + j] = hs_[t][j];
    }
    h_prev = hs_[t];
    c_prev = cs_[t];
  }
  return out;
}

Tensor LSTM::backward(const Tensor& dh_seq) {
  const std::int64_t T = xs_.shape[0];
  const int H = hidden_, D = in_dim_;
  Tensor dx({T, D});
  std::vector<float> dh_next(H, 0.0f), dc_next(H, 0.0f), dz(4 * H);
  const auto& K = simd::active();

  for (std::int64_t t = T - 1; t >= 0; --t) {
    const auto& g = gates_[t];
    const float* c_prev = (t > 0) ? cs_[t - 1].data() : nullptr;
    const float* h_prev = (t > 0) ? hs_[t - 1].data() : nullptr;
    for (int j = 0; j < H; ++j) {
      const float i = g[j], f = g[H + j], gg = g[2 * H + j], o = g[3 * H + j];
      const float tc = std::tanh(cs_[t][j]);
      const float dh = dh_seq.v[t * H + j] + dh_next[j];
      const float dout = dh * tc;
      const float dc = dc_next[j] + dh * o * (1.0f - tc * tc);
      const float di = dc * gg;
      const float dgg = dc * i;
      const float df = dc * (c_prev ? c_prev[j] : 0.0f);
      dz[j] = di * i * (1.0f - i);
      dz[H + j] = df * f * (1.0f - f);
      dz[2 * H + j] = dgg * (1.0f - gg * gg);
      dz[3 * H + j] = dout * o * (1.0f - o);
      dc_next[j] = dc * f;
    }
    const float* xt = xs_.data() + t * D;
    for (int r = 0; r < 4 * H; ++r) {
      K.axpy(D, dz[r], xt, wx_.g.data() + r * D);
      if (h_prev) K.axpy(H, dz[r], h_prev, wh_.g.data() + r * H);
      b_.g.v[r] += dz[r];
    }
    // dx_t = Wx^T dz ; dh_next = Wh^T dz
    float* dxt = dx.data() + t * D;
    std::fill(dh_next.begin(), dh_next.end(), 0.0f);
    for (int r = 0; r < 4 * H; ++r) {
      K.axpy(D, dz[r], wx_.w.data() + r * D, dxt);
      K.axpy(H, dz[r], wh_.w.data() + r * H, dh_next.data());
    }
  }
  return dx;
}

}  // namespace pdac::nn
